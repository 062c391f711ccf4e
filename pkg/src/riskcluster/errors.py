"""Exception hierarchy.

Errors fall into three families that the CLI maps onto exit codes:
data problems (1), configuration problems (2) and numerical failures (3).
"""


class RiskClusterError(Exception):
    """Base class. ``stage`` is filled in by the pipeline when known."""

    exit_code = 1
    stage: str | None = None

    def __str__(self) -> str:
        msg = super().__str__()
        return f"[{self.stage}] {msg}" if self.stage else msg


class DataError(RiskClusterError, ValueError):
    exit_code = 1


class ConfigError(RiskClusterError, ValueError):
    exit_code = 2


class NumericalError(RiskClusterError, ArithmeticError):
    exit_code = 3


# schema_io
class EmptyFile(DataError):
    pass


class MissingColumn(DataError):
    def __init__(self, name: str):
        super().__init__(f"missing column {name!r}")
        self.name = name


class BadValue(DataError):
    def __init__(self, row: int, column: str, reason: str):
        super().__init__(f"row {row}, column {column!r}: {reason}")
        self.row = row
        self.column = column
        self.reason = reason


# preprocess
class AllMissing(DataError):
    pass


class UnimputedMissing(DataError):
    pass


class ColumnMismatch(DataError):
    pass


class DegenerateSplit(DataError):
    pass


# pca / kmeans
class NotStandardized(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class TooFewPoints(DataError):
    pass


class CurveTooShort(DataError):
    pass


class ConvergenceFailure(NumericalError):
    pass


class NoComponents(NumericalError):
    pass


# lasso / metrics
class NoVariance(DataError):
    pass


class SingleClass(DataError):
    pass


class UndefinedRate(DataError):
    pass


# synthetic cohorts / pipeline
class InvalidConfig(ConfigError):
    pass


class CalibrationFailure(NumericalError):
    pass


class EmptyGroup(DataError):
    pass


class IoFailure(RiskClusterError, OSError):
    exit_code = 2
