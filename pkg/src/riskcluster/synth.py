"""Seeded synthetic cohorts with planted cluster structure and outcome signal.

The real cohort is confidential, so the generator reproduces what is
published about it: per-cluster means and SDs of the seven clustering
variables, cluster sizes, and outcome prevalence. Everything else
(categorical mixes, flag rates, within-cluster correlation) is a
configurable assumption; within a cluster variables are independent.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np
from scipy.optimize import least_squares
from scipy.special import ndtr

from .errors import CalibrationFailure, InvalidConfig
from .preprocess import encode_design_matrix, fit_standardizer, impute_mother_age_global
from .schema import (
    CATEGORICAL_DOMAINS,
    CLUSTERING_VARIABLES,
    MAX_CHILD_AGE,
    Cohort,
    NotificationRecord,
)
from .seeding import derive_seed

BINARY_RATE_FIELDS = ("prev_risk_safety_flag", "prev_custody_flag", "open_phase_flag", "benefit_inclusion_flag")


@dataclass(frozen=True)
class Archetype:
    weight: float
    moments: Mapping[str, tuple[float, float]]  # variable -> (mean, sd)


@dataclass(frozen=True)
class SyntheticCohortConfig:
    n: int
    seed: int = 0
    prevalence: float = 0.48
    global_moments: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    clusters: tuple[Archetype, ...] = ()
    mother_age_missing_rate: float = 0.05
    categorical_missing_rate: float = 0.03
    binary_rates: Mapping[str, float] = field(default_factory=dict)
    ordinal_probs: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    categorical_probs: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    coefficients: Mapping[str, float] = field(default_factory=dict)
    intercept: float | None = None

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n <= 0:
            raise InvalidConfig(f"n must be a positive integer, got {self.n!r}")
        if not 0 < self.prevalence < 1:
            raise InvalidConfig(f"prevalence {self.prevalence} outside (0, 1)")
        for rate in (self.mother_age_missing_rate, self.categorical_missing_rate):
            if not 0 <= rate < 1:
                raise InvalidConfig(f"missing rate {rate} outside [0, 1)")
        archetypes = self.archetypes()
        w = np.array([a.weight for a in archetypes], dtype=float)
        if np.any(w <= 0):
            raise InvalidConfig("cluster weights must be positive")
        for a in archetypes:
            missing = [v for v in CLUSTERING_VARIABLES if v not in a.moments]
            if missing:
                raise InvalidConfig(f"moments missing for {missing}")
            for var, (mean, sd) in a.moments.items():
                if sd <= 0:
                    raise InvalidConfig(f"SD of {var} must be positive")
                if var == "child_age" and not 0 < mean < MAX_CHILD_AGE:
                    raise InvalidConfig(f"child_age mean {mean} outside (0, {MAX_CHILD_AGE})")
                if var == "n_children_reported" and mean < 1:
                    raise InvalidConfig("n_children_reported mean must be at least 1")
                if var != "child_age" and mean < 0:
                    raise InvalidConfig(f"mean of {var} must be non-negative")
        for name, probs in self.ordinal_probs.items():
            if len(probs) != 4 or abs(sum(probs) - 1) > 1e-9:
                raise InvalidConfig(f"ordinal_probs[{name}] must be 4 probabilities summing to 1")
        for name, probs in self.categorical_probs.items():
            if name not in CATEGORICAL_DOMAINS:
                raise InvalidConfig(f"unknown categorical field {name!r}")
            bad = [k for k in probs if k not in CATEGORICAL_DOMAINS[name]]
            if bad:
                raise InvalidConfig(f"levels {bad} not in domain of {name}")
            if abs(sum(probs.values()) - 1) > 1e-9:
                raise InvalidConfig(f"categorical_probs[{name}] must sum to 1")

    def archetypes(self) -> tuple[Archetype, ...]:
        if self.clusters:
            return self.clusters
        if not self.global_moments:
            raise InvalidConfig("config needs cluster archetypes or global moments")
        return (Archetype(1.0, self.global_moments),)

    def weights(self) -> np.ndarray:
        w = np.array([a.weight for a in self.archetypes()], dtype=float)
        return w / w.sum()

    def cluster_sizes(self) -> np.ndarray:
        """Largest-remainder allocation of ``n`` across archetypes."""
        exact = self.weights() * self.n
        sizes = np.floor(exact).astype(int)
        order = np.lexsort((np.arange(len(exact)), -(exact - sizes)))
        sizes[order[: self.n - sizes.sum()]] += 1
        return sizes

    @classmethod
    def from_dict(cls, d: Mapping) -> "SyntheticCohortConfig":
        d = dict(d)

        def moments(m):
            try:
                return {k: (float(v[0]), float(v[1])) for k, v in m.items()}
            except (TypeError, IndexError, ValueError):
                raise InvalidConfig(f"moments must map variable -> [mean, sd]: {m!r}") from None

        clusters = tuple(
            Archetype(float(c["weight"]), moments(c["moments"])) for c in d.pop("clusters", None) or ()
        )
        signal = d.pop("signal", None) or {}
        known = {f for f in cls.__dataclass_fields__}
        unknown = [k for k in d if k not in known]
        if unknown:
            raise InvalidConfig(f"unknown generator keys: {unknown}")
        try:
            return cls(
                n=d.get("n", 0),
                seed=int(d.get("seed", 0)),
                prevalence=float(d.get("prevalence", 0.48)),
                global_moments=moments(d.get("global_moments") or {}),
                clusters=clusters,
                mother_age_missing_rate=float(d.get("mother_age_missing_rate", 0.05)),
                categorical_missing_rate=float(d.get("categorical_missing_rate", 0.03)),
                binary_rates={k: float(v) for k, v in (d.get("binary_rates") or {}).items()},
                ordinal_probs={k: tuple(float(x) for x in v) for k, v in (d.get("ordinal_probs") or {}).items()},
                categorical_probs={k: {str(a): float(b) for a, b in v.items()} for k, v in (d.get("categorical_probs") or {}).items()},
                coefficients={k: float(v) for k, v in (signal.get("coefficients") or {}).items()},
                intercept=None if signal.get("intercept") is None else float(signal["intercept"]),
            )
        except (TypeError, ValueError) as err:
            if isinstance(err, InvalidConfig):
                raise
            raise InvalidConfig(str(err)) from None


# ---------------------------------------------------------------- samplers

@lru_cache(maxsize=512)
def latent_normal(mean: float, sd: float, lower: int = 0, upper: int | None = None) -> tuple[float, float]:
    """Parameters of a normal whose rounded, clipped draws have ``mean`` and ``sd``.

    Clipping at the domain edge piles mass on the boundary and shifts the
    moments, so the latent location and scale are solved for numerically
    from the exact moments of the discretized distribution.
    """
    if upper is not None and not lower < mean < upper:
        raise InvalidConfig(f"mean {mean} must lie strictly inside ({lower}, {upper})")

    def residual(x):
        m, s = _discrete_moments(x[0], math.exp(x[1]), lower, upper)
        return [(m - mean) / sd, (s - sd) / sd]

    fit = least_squares(residual, [mean, math.log(sd)], xtol=1e-14, ftol=1e-14, gtol=1e-14)
    if np.max(np.abs(fit.fun)) > 1e-6:
        raise InvalidConfig(f"cannot match mean {mean}, sd {sd} on [{lower}, {upper}]")
    return float(fit.x[0]), float(math.exp(fit.x[1]))


def _discrete_moments(mu: float, sigma: float, lower: int, upper: int | None) -> tuple[float, float]:
    top = upper if upper is not None else int(max(lower + 1, mu + 12 * sigma)) + 1
    ks = np.arange(lower, top + 1)
    cdf_hi = ndtr((ks + 0.5 - mu) / sigma)
    cdf_lo = ndtr((ks - 0.5 - mu) / sigma)
    p = cdf_hi - cdf_lo
    p[0] = cdf_hi[0]
    if upper is not None:
        p[-1] = 1.0 - cdf_lo[-1]
    m = float(p @ ks)
    return m, float(np.sqrt(p @ (ks - m) ** 2))


def sample_count(rng: np.random.Generator, mean: float, sd: float, size: int, lower: int = 0, upper: int | None = None) -> np.ndarray:
    """Rounded normal draws clipped to ``[lower, upper]`` with the requested moments."""
    if mean <= lower:
        return np.full(size, lower, dtype=np.int64)
    mu, sigma = latent_normal(float(mean), float(sd), lower, upper)
    draws = np.rint(rng.normal(mu, sigma, size))
    return np.clip(draws, lower, upper).astype(np.int64)


def _draw_levels(rng, levels, probs, size):
    idx = rng.choice(len(levels), p=np.asarray(probs, dtype=float), size=size)
    return [levels[i] for i in idx]


def _default_categorical(name: str) -> dict[str, float]:
    levels = [l for l in CATEGORICAL_DOMAINS[name] if l != "Unknown"]
    return {l: 1.0 / len(levels) for l in levels}


def _draw_cluster(cfg: SyntheticCohortConfig, arch: Archetype, size: int, rng: np.random.Generator) -> list[NotificationRecord]:
    m = arch.moments
    age = sample_count(rng, *m["child_age"], size, upper=MAX_CHILD_AGE)
    n_prev = sample_count(rng, *m["n_prev_notifications"], size)
    days = sample_count(rng, *m["days_since_last_intake"], size)
    n_malt = sample_count(rng, *m["n_maltreatment_findings"], size)
    n_children = sample_count(rng, *m["n_children_reported"], size, lower=1)
    n_sib = sample_count(rng, *m["n_sibling_prev_notifications"], size)
    mother = rng.normal(*m["mother_age"], size=size)
    mother = np.round(np.clip(mother, 12.0, 70.0), 2)
    mother_missing = rng.random(size) < cfg.mother_age_missing_rate

    flags = {
        name: (rng.random(size) < cfg.binary_rates.get(name, 0.3)).astype(int) for name in BINARY_RATE_FIELDS
    }
    ordinals = {
        name: rng.choice(4, p=cfg.ordinal_probs.get(name, (0.25, 0.25, 0.25, 0.25)), size=size) + 1
        for name in ("msd_ot_contact_level", "mother_cps_contact_level")
    }
    cats = {}
    for name in CATEGORICAL_DOMAINS:
        probs = cfg.categorical_probs.get(name) or _default_categorical(name)
        levels = list(probs)
        drawn = _draw_levels(rng, levels, [probs[l] for l in levels], size)
        unknown = rng.random(size) < cfg.categorical_missing_rate
        cats[name] = ["Unknown" if u else v for v, u in zip(drawn, unknown)]

    records = []
    for i in range(size):
        records.append(
            NotificationRecord(
                child_age=int(age[i]),
                gender=cats["gender"][i],
                ethnic_group=cats["ethnic_group"][i],
                prev_risk_safety_flag=int(flags["prev_risk_safety_flag"][i]),
                n_prev_notifications=int(n_prev[i]),
                no_prev_notification_flag=int(n_prev[i] == 0),
                days_since_last_intake=int(days[i]),
                no_prev_intake_flag=int(days[i] == 0),
                n_maltreatment_findings=int(n_malt[i]),
                no_prev_maltreatment_flag=int(n_malt[i] == 0),
                prev_custody_flag=int(flags["prev_custody_flag"][i]),
                open_phase_flag=int(flags["open_phase_flag"][i]),
                benefit_inclusion_flag=int(flags["benefit_inclusion_flag"][i]),
                msd_ot_contact_level=int(ordinals["msd_ot_contact_level"][i]),
                mother_age=None if mother_missing[i] else float(mother[i]),
                mother_cps_contact_level=int(ordinals["mother_cps_contact_level"][i]),
                deprivation_index=cats["deprivation_index"][i],
                n_children_reported=int(n_children[i]),
                n_sibling_prev_notifications=int(n_sib[i]),
                notifier_role=cats["notifier_role"][i],
                outcome=0,
            )
        )
    return records


# ---------------------------------------------------------------- outcome

@dataclass(frozen=True)
class PlantedSignal:
    """The true outcome model: ``logit P(y=1) = intercept + z @ coefficients``.

    ``z`` is the encoded predictor matrix standardized with the stored
    column means and scales (fixed at generation time so fresh draws are
    scored on the same footing).
    """

    columns: tuple[str, ...]
    mean: np.ndarray
    scale: np.ndarray
    coefficients: np.ndarray
    intercept: float

    def linear_score(self, cohort: Cohort) -> np.ndarray:
        design = encode_design_matrix(impute_mother_age_global(cohort)).select(self.columns)
        z = (design.values - self.mean) / self.scale
        return self.intercept + z @ self.coefficients


@dataclass(frozen=True)
class PlantedOutcome:
    labels: np.ndarray
    signal: PlantedSignal


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def planted_outcome(
    cohort: Cohort,
    coefficients: Mapping[str, float],
    prevalence: float = 0.48,
    seed: int = 0,
    intercept: float | None = None,
) -> PlantedOutcome:
    """Draw Bernoulli outcomes from a logistic model over the encoded predictors.

    Uniform variates are drawn once; the intercept is then found by
    bisection so that the empirical prevalence of ``u < sigmoid(b + score)``
    hits ``prevalence`` (to within one record). Pass ``intercept`` to skip
    calibration and reuse a known model.
    """
    design = encode_design_matrix(impute_mother_age_global(cohort))
    columns = tuple(coefficients) if coefficients else ()
    unknown = [c for c in columns if c not in design.columns]
    if unknown:
        raise InvalidConfig(f"signal coefficients name unknown encoded columns: {unknown}")
    beta = np.array([coefficients[c] for c in columns], dtype=float)
    if columns:
        std = fit_standardizer(design, columns)
        mean, scale = std.mean, std.scale
        z = (design.select(columns).values - mean) / scale
        score = z @ beta
    else:
        mean = scale = np.zeros(0)
        score = np.zeros(len(cohort))
    rng = np.random.default_rng(seed)
    u = rng.random(len(cohort))
    if intercept is None:
        target = prevalence

        def prev(b):
            return float(np.mean(u < _sigmoid(b + score)))

        lo, hi = -40.0, 40.0
        if prev(lo) > target or prev(hi) < target:
            raise CalibrationFailure(f"cannot bracket prevalence {target} with intercept in [{lo}, {hi}]")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if prev(mid) < target:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-12:
                break
        b_lo, b_hi = prev(lo), prev(hi)
        intercept = lo if abs(b_lo - target) <= abs(b_hi - target) else hi
    labels = (u < _sigmoid(intercept + score)).astype(int)
    signal = PlantedSignal(columns, np.asarray(mean), np.asarray(scale), beta, float(intercept))
    return PlantedOutcome(labels, signal)


def _draw_predictors(cfg: SyntheticCohortConfig) -> tuple[list[NotificationRecord], np.ndarray]:
    records: list[NotificationRecord] = []
    membership = []
    for c, (arch, size) in enumerate(zip(cfg.archetypes(), cfg.cluster_sizes())):
        rng = np.random.default_rng(derive_seed(cfg.seed, "cluster", c))
        records.extend(_draw_cluster(cfg, arch, int(size), rng))
        membership.extend([c] * int(size))
    return records, np.asarray(membership)


@dataclass(frozen=True)
class GeneratedCohort:
    cohort: Cohort
    membership: np.ndarray  # planted cluster of every record
    signal: PlantedSignal


def generate_with_truth(cfg: SyntheticCohortConfig, signal: PlantedSignal | None = None) -> GeneratedCohort:
    """Generate a cohort and keep the planted truth alongside it.

    With ``signal`` given, outcomes are drawn from that fixed model instead
    of calibrating a new one (used to score fresh draws of the same model).
    """
    records, membership = _draw_predictors(cfg)
    cohort = Cohort(tuple(records), f"synthetic-{cfg.seed}")
    seed = derive_seed(cfg.seed, "outcome")
    if signal is None:
        planted = planted_outcome(cohort, cfg.coefficients, cfg.prevalence, seed, cfg.intercept)
        labels, signal = planted.labels, planted.signal
    else:
        eta = signal.linear_score(cohort)
        u = np.random.default_rng(seed).random(len(cohort))
        labels = (u < _sigmoid(eta)).astype(int)
    records = tuple(dataclasses.replace(r, outcome=int(y)) for r, y in zip(records, labels))
    return GeneratedCohort(Cohort(records, cohort.source_id), membership, signal)


def generate_cohort(cfg: SyntheticCohortConfig) -> Cohort:
    return generate_with_truth(cfg).cohort
