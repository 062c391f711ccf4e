"""Cohort data model and CSV ingestion.

One row of the cohort CSV is one child's first care-and-protection
notification of the year, with child, caregiver, family and notifier
predictors plus the two-year binary outcome.
"""
from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path
from typing import Iterable

from .errors import BadValue, EmptyFile, MissingColumn

GENDERS = ("Male", "Female", "Unknown")
ETHNIC_GROUPS = ("Maori", "MaoriAndPacific", "Pacific", "European", "Other", "Unknown")
DEPRIVATION_LEVELS = tuple(str(i) for i in range(1, 11)) + ("Unknown",)
NOTIFIER_ROLES = (
    "Anonymous",
    "Court",
    "Family",
    "HealthProfessionals",
    "MidwifeOrPlunket",
    "NeighboursOrFriends",
    "PoliceFVI",
    "PoliceOther",
    "SchoolOrECC",
    "Unknown",
    "Others",
)
CONTACT_LEVELS = (1, 2, 3, 4)
MAX_CHILD_AGE = 15

# Declared domain of each categorical field, first level is the regression reference.
CATEGORICAL_DOMAINS: dict[str, tuple[str, ...]] = {
    "gender": GENDERS,
    "ethnic_group": ETHNIC_GROUPS,
    "deprivation_index": DEPRIVATION_LEVELS,
    "notifier_role": NOTIFIER_ROLES,
}

BINARY_FIELDS = (
    "prev_risk_safety_flag",
    "no_prev_notification_flag",
    "no_prev_intake_flag",
    "no_prev_maltreatment_flag",
    "prev_custody_flag",
    "open_phase_flag",
    "benefit_inclusion_flag",
)
COUNT_FIELDS = (
    "n_prev_notifications",
    "days_since_last_intake",
    "n_maltreatment_findings",
    "n_children_reported",
    "n_sibling_prev_notifications",
)
ORDINAL_FIELDS = ("msd_ot_contact_level", "mother_cps_contact_level")

# The seven numeric variables the clustering runs on, in their published order.
CLUSTERING_VARIABLES = (
    "child_age",
    "n_prev_notifications",
    "days_since_last_intake",
    "n_maltreatment_findings",
    "mother_age",
    "n_children_reported",
    "n_sibling_prev_notifications",
)


@dataclass(frozen=True)
class NotificationRecord:
    child_age: int
    gender: str
    ethnic_group: str
    prev_risk_safety_flag: int
    n_prev_notifications: int
    no_prev_notification_flag: int
    days_since_last_intake: int
    no_prev_intake_flag: int
    n_maltreatment_findings: int
    no_prev_maltreatment_flag: int
    prev_custody_flag: int
    open_phase_flag: int
    benefit_inclusion_flag: int
    msd_ot_contact_level: int
    mother_age: float | None
    mother_cps_contact_level: int
    deprivation_index: str
    n_children_reported: int
    n_sibling_prev_notifications: int
    notifier_role: str
    outcome: int


COLUMNS: tuple[str, ...] = tuple(f.name for f in fields(NotificationRecord))
PREDICTOR_FIELDS: tuple[str, ...] = tuple(c for c in COLUMNS if c != "outcome")


@dataclass(frozen=True)
class Cohort:
    """An ordered, immutable collection of records.

    ``rejected`` holds the row errors collected by a non-strict parse so
    that every input row is accounted for.
    """

    records: tuple[NotificationRecord, ...]
    source_id: str = ""
    rejected: tuple[BadValue, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if not isinstance(self.records, tuple):
            object.__setattr__(self, "records", tuple(self.records))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.records]

    def subset(self, indices: Iterable[int], source_id: str | None = None) -> "Cohort":
        recs = self.records
        return Cohort(tuple(recs[i] for i in indices), source_id or self.source_id)


@dataclass(frozen=True)
class Violation:
    record: int
    field: str
    reason: str


def _parse_int(text: str, row: int, col: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise BadValue(row, col, f"not an integer: {text!r}") from None


def _parse_field(name: str, text: str, row: int):
    if name == "mother_age":
        if text.strip() == "":
            return None
        try:
            value = float(text)
        except ValueError:
            raise BadValue(row, name, f"not a number: {text!r}") from None
        if not math.isfinite(value) or value <= 0:
            raise BadValue(row, name, f"invalid age {text!r}")
        return value
    if name in CATEGORICAL_DOMAINS:
        value = text.strip()
        if value not in CATEGORICAL_DOMAINS[name]:
            raise BadValue(row, name, f"{value!r} not in declared domain")
        return value
    value = _parse_int(text, row, name)
    reason = _int_domain_error(name, value)
    if reason:
        raise BadValue(row, name, reason)
    return value


def _int_domain_error(name: str, value) -> str | None:
    if name == "child_age":
        if not 0 <= value <= MAX_CHILD_AGE:
            return f"child_age {value} outside 0-{MAX_CHILD_AGE}"
    elif name in BINARY_FIELDS or name == "outcome":
        if value not in (0, 1):
            return f"{value} is not binary"
    elif name in ORDINAL_FIELDS:
        if value not in CONTACT_LEVELS:
            return f"level {value} not in 1-4"
    elif name == "n_children_reported":
        if value < 1:
            return "must count at least the index child"
    elif name in COUNT_FIELDS:
        if value < 0:
            return "negative count"
    return None


def parse_cohort_csv(path: str | Path, *, strict: bool = True) -> Cohort:
    """Read a cohort CSV.

    With ``strict=True`` the first bad row raises :class:`BadValue`. With
    ``strict=False`` bad rows are skipped and reported in
    ``Cohort.rejected`` so that ``rows == len(records) + len(rejected)``.
    Row numbers in errors are 1-based data rows (the header is row 0).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyFile(f"{path}: no header row")
        header = [h.strip() for h in header]
        for name in COLUMNS:
            if name not in header:
                raise MissingColumn(name)
        pos = {name: header.index(name) for name in COLUMNS}
        records = []
        rejected = []
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            try:
                if len(row) < len(header):
                    raise BadValue(i, "*", f"expected {len(header)} cells, got {len(row)}")
                values = {name: _parse_field(name, row[pos[name]], i) for name in COLUMNS}
                records.append(NotificationRecord(**values))
            except BadValue as err:
                if strict:
                    raise
                rejected.append(err)
    if not records and not rejected:
        raise EmptyFile(f"{path}: no data rows")
    return Cohort(tuple(records), source_id=path.name, rejected=tuple(rejected))


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_cohort_csv(cohort: Cohort, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for rec in cohort.records:
            writer.writerow([_format(v) for v in astuple(rec)])


def validate_record(rec: NotificationRecord, index: int = 0) -> list[Violation]:
    out = []
    for name in COLUMNS:
        value = getattr(rec, name)
        if name == "mother_age":
            if value is not None and not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                out.append(Violation(index, name, f"invalid age {value!r}"))
            continue
        if name in CATEGORICAL_DOMAINS:
            if value not in CATEGORICAL_DOMAINS[name]:
                out.append(Violation(index, name, f"{value!r} not in declared domain"))
            continue
        if not isinstance(value, int) or isinstance(value, bool):
            out.append(Violation(index, name, f"{value!r} is not an integer"))
            continue
        reason = _int_domain_error(name, value)
        if reason:
            out.append(Violation(index, name, reason))
    if isinstance(rec.n_prev_notifications, int) and (rec.no_prev_notification_flag == 1) != (rec.n_prev_notifications == 0):
        out.append(Violation(index, "no_prev_notification_flag", "inconsistent with n_prev_notifications"))
    if isinstance(rec.n_maltreatment_findings, int) and (rec.no_prev_maltreatment_flag == 1) != (rec.n_maltreatment_findings == 0):
        out.append(Violation(index, "no_prev_maltreatment_flag", "inconsistent with n_maltreatment_findings"))
    return out


def validate_cohort(cohort: Cohort) -> list[Violation]:
    """Every record/field pair that breaks a schema invariant; empty when valid."""
    out = []
    for i, rec in enumerate(cohort.records):
        out.extend(validate_record(rec, i))
    return out
