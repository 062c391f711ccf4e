"""Imputation, encoding, standardization and train/test splitting."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AllMissing, ColumnMismatch, DegenerateSplit, UnimputedMissing
from .schema import CATEGORICAL_DOMAINS, PREDICTOR_FIELDS, Cohort


def _mean(values: list[float]) -> float:
    return float(np.mean(np.asarray(values, dtype=float)))


def impute_mother_age_global(cohort: Cohort) -> Cohort:
    observed = [r.mother_age for r in cohort.records if r.mother_age is not None]
    if not observed:
        raise AllMissing("no observed mother_age to impute from")
    if len(observed) == len(cohort):
        return cohort
    fill = _mean(observed)
    records = tuple(
        dataclasses.replace(r, mother_age=fill) if r.mother_age is None else r
        for r in cohort.records
    )
    return Cohort(records, cohort.source_id)


def impute_mother_age_clusterwise(cohort: Cohort, assignment: Sequence[int]) -> Cohort:
    """Fill missing mother ages with the mean of observed ages in the same cluster.

    A cluster with no observed ages falls back to the mean over the whole cohort.
    """
    if len(assignment) != len(cohort):
        raise ColumnMismatch(f"{len(assignment)} cluster ids for {len(cohort)} records")
    sums: dict[int, list[float]] = {}
    for rec, c in zip(cohort.records, assignment):
        if rec.mother_age is not None:
            sums.setdefault(int(c), []).append(rec.mother_age)
    if all(r.mother_age is not None for r in cohort.records):
        return cohort
    if not sums:
        raise AllMissing("no observed mother_age to impute from")
    means = {c: _mean(v) for c, v in sums.items()}
    global_mean = _mean([r.mother_age for r in cohort.records if r.mother_age is not None])
    records = []
    for rec, c in zip(cohort.records, assignment):
        if rec.mother_age is None:
            rec = dataclasses.replace(rec, mother_age=means.get(int(c), global_mean))
        records.append(rec)
    return Cohort(tuple(records), cohort.source_id)


@dataclass(frozen=True)
class DesignMatrix:
    values: np.ndarray
    columns: tuple[str, ...]
    row_index: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.columns):
            raise ColumnMismatch(f"{self.values.shape} values for {len(self.columns)} columns")
        if len(set(self.columns)) != len(self.columns):
            raise ColumnMismatch("duplicate column names")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def select(self, columns: Sequence[str]) -> "DesignMatrix":
        idx = self.column_indices(columns)
        return DesignMatrix(self.values[:, idx], tuple(columns), self.row_index)

    def take(self, rows) -> "DesignMatrix":
        rows = np.asarray(rows)
        return DesignMatrix(self.values[rows], self.columns, self.row_index[rows])

    def column_indices(self, columns: Sequence[str]) -> list[int]:
        pos = {c: i for i, c in enumerate(self.columns)}
        missing = [c for c in columns if c not in pos]
        if missing:
            raise ColumnMismatch(f"columns not present: {missing}")
        return [pos[c] for c in columns]


def encoded_columns() -> tuple[str, ...]:
    cols = []
    for name in PREDICTOR_FIELDS:
        if name in CATEGORICAL_DOMAINS:
            cols.extend(f"{name}_{level}" for level in CATEGORICAL_DOMAINS[name][1:])
        else:
            cols.append(name)
    return tuple(cols)


def encode_design_matrix(cohort: Cohort) -> DesignMatrix:
    """Numeric fields pass through; categoricals become reference-coded indicators.

    The first level of each declared domain is the reference. ``Unknown``
    is an ordinary level, so missing categories get their own column.
    """
    n = len(cohort)
    blocks = []
    for name in PREDICTOR_FIELDS:
        raw = cohort.column(name)
        if name in CATEGORICAL_DOMAINS:
            levels = CATEGORICAL_DOMAINS[name]
            code = {lvl: i for i, lvl in enumerate(levels)}
            idx = np.fromiter((code[v] for v in raw), dtype=np.int64, count=n)
            onehot = np.zeros((n, len(levels) - 1))
            mask = idx > 0
            onehot[np.nonzero(mask)[0], idx[mask] - 1] = 1.0
            blocks.append(onehot)
        else:
            if name == "mother_age" and any(v is None for v in raw):
                raise UnimputedMissing("mother_age has missing values; impute first")
            blocks.append(np.asarray(raw, dtype=float).reshape(n, 1))
    values = np.hstack(blocks) if n else np.zeros((0, len(encoded_columns())))
    return DesignMatrix(values, encoded_columns(), np.arange(n))


def outcome_vector(cohort: Cohort) -> np.ndarray:
    return np.asarray(cohort.column("outcome"), dtype=float)


@dataclass(frozen=True)
class Standardizer:
    columns: tuple[str, ...]
    mean: np.ndarray
    scale: np.ndarray
    constant: np.ndarray  # True where the fitted column had zero variance

    def apply(self, m: DesignMatrix) -> DesignMatrix:
        return apply_standardizer(self, m)

    def inverse(self, m: DesignMatrix) -> DesignMatrix:
        idx = m.column_indices(self.columns)
        values = m.values.copy()
        values[:, idx] = values[:, idx] * self.scale + self.mean
        return DesignMatrix(values, m.columns, m.row_index)


def fit_standardizer(m: DesignMatrix, columns: Sequence[str] | None = None) -> Standardizer:
    """Column means and sample (n-1) standard deviations.

    Zero-variance columns get scale 1 and are flagged in ``constant``.
    """
    columns = tuple(m.columns if columns is None else columns)
    x = m.values[:, m.column_indices(columns)]
    if x.shape[0] < 2:
        raise ColumnMismatch("need at least two rows to estimate a scale")
    mean = x.mean(axis=0)
    sd = x.std(axis=0, ddof=1)
    constant = sd <= 1e-12 * np.maximum(1.0, np.abs(mean))
    sd = np.where(constant, 1.0, sd)
    return Standardizer(columns, mean, sd, constant)


def apply_standardizer(s: Standardizer, m: DesignMatrix) -> DesignMatrix:
    """Standardize the fitted columns of ``m``; other columns are left alone."""
    idx = m.column_indices(s.columns)
    values = m.values.copy()
    values[:, idx] = (values[:, idx] - s.mean) / s.scale
    return DesignMatrix(values, m.columns, m.row_index)


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray
    seed: int


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def split_train_test(
    n: int,
    fraction: float = 0.7,
    seed: int = 0,
    stratify_by: Sequence | None = None,
) -> SplitIndices:
    """Random train/test partition with ``round(fraction * n)`` training rows.

    When ``stratify_by`` is given each label contributes its own share,
    with leftover slots handed out by largest remainder so the total size
    rule still holds.
    """
    if not 0 < fraction < 1:
        raise DegenerateSplit(f"fraction {fraction} outside (0, 1)")
    if n < 2:
        raise DegenerateSplit(f"cannot split {n} rows")
    n_train = _round_half_up(fraction * n)
    if n_train == 0 or n_train == n:
        raise DegenerateSplit(f"split of {n} rows at {fraction} leaves one side empty")
    rng = np.random.default_rng(seed)
    if stratify_by is None:
        perm = rng.permutation(n)
        train, test = perm[:n_train], perm[n_train:]
    else:
        labels = np.asarray(stratify_by)
        if labels.shape[0] != n:
            raise DegenerateSplit("stratification labels do not match n")
        groups = [np.nonzero(labels == lvl)[0] for lvl in np.unique(labels)]
        exact = np.array([fraction * len(g) for g in groups])
        quota = np.floor(exact).astype(int)
        leftover = n_train - quota.sum()
        order = np.lexsort((np.arange(len(groups)), -(exact - quota)))
        quota[order[:leftover]] += 1
        train_parts, test_parts = [], []
        for g, q in zip(groups, quota):
            g = rng.permutation(g)
            train_parts.append(g[:q])
            test_parts.append(g[q:])
        train = np.concatenate(train_parts)
        test = np.concatenate(test_parts)
    return SplitIndices(np.sort(train), np.sort(test), seed)
