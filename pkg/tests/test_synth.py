import dataclasses
import math

import numpy as np
import pytest

from riskcluster.config import generator_config, load_config
from riskcluster.errors import CalibrationFailure, InvalidConfig
from riskcluster.metrics import auc
from riskcluster.schema import CLUSTERING_VARIABLES, validate_cohort
from riskcluster.synth import (
    SyntheticCohortConfig,
    _discrete_moments,
    generate_with_truth,
    latent_normal,
    planted_outcome,
    sample_count,
)

# published per-cluster (mean, sd) of the clustering variables, in CLUSTERING_VARIABLES order
TABLE4 = [
    [(3.44, 2.94), (1.11, 1.75), (193.90, 397.11), (0.30, 0.84), (28.41, 5.29), (1.25, 1.04), (2.31, 3.83)],
    [(10.78, 2.96), (12.50, 5.02), (979.0, 805.02), (6.21, 3.38), (35.47, 6.12), (2.14, 1.56), (22.56, 20.85)],
    [(11.18, 2.86), (2.81, 2.89), (1050.0, 1233.32), (0.70, 1.17), (39.47, 6.49), (1.24, 1.08), (2.96, 4.23)],
    [(6.92, 3.85), (3.91, 3.03), (594.10, 665.15), (1.15, 1.47), (34.10, 4.91), (4.11, 1.36), (21.96, 17.58)],
]
TABLE4_SIZES = (23658, 5544, 17901, 8187)
TABLE2 = [(7.20, 4.68), (3.22, 4.31), (609.10, 917.01), (1.15, 2.27), (33.70, 7.48), (1.76, 1.55), (7.46, 13.16)]


@pytest.fixture(scope="module")
def default_cfg():
    return generator_config(load_config())


@pytest.fixture(scope="module")
def full_cohort(default_cfg):
    return generate_with_truth(default_cfg)


def column_array(cohort, name):
    return np.array([np.nan if v is None else v for v in cohort.column(name)], dtype=float)


def test_default_config_carries_published_values(default_cfg):
    assert default_cfg.n == 55287
    assert default_cfg.prevalence == 0.48
    for arch, size, row in zip(default_cfg.clusters, TABLE4_SIZES, TABLE4):
        assert arch.weight == size
        assert [arch.moments[v] for v in CLUSTERING_VARIABLES] == row
    assert [default_cfg.global_moments[v] for v in CLUSTERING_VARIABLES] == TABLE2


def test_cluster_means_match_published(full_cohort):
    cohort, member = full_cohort.cohort, full_cohort.membership
    for c, row in enumerate(TABLE4):
        idx = np.nonzero(member == c)[0]
        for var, (mean, sd) in zip(CLUSTERING_VARIABLES, row):
            x = column_array(cohort, var)[idx]
            assert abs(np.nanmean(x) - mean) <= 0.1 * sd, (c, var)


def test_cluster_moments_tight(full_cohort):
    # moment matching at the 0.05 SD level for every configured archetype
    cohort, member = full_cohort.cohort, full_cohort.membership
    for c, row in enumerate(TABLE4):
        idx = np.nonzero(member == c)[0]
        for var, (mean, sd) in zip(CLUSTERING_VARIABLES, row):
            x = column_array(cohort, var)[idx]
            assert abs(np.nanmean(x) - mean) <= 0.05 * sd, (c, var)


def test_global_moments_without_clusters(default_cfg):
    cfg = dataclasses.replace(default_cfg, clusters=(), n=50_000, seed=7)
    cohort = generate_with_truth(cfg).cohort
    for var, (mean, sd) in zip(CLUSTERING_VARIABLES, TABLE2):
        x = column_array(cohort, var)
        assert abs(np.nanmean(x) - mean) <= 0.05 * sd, var


def test_generated_cohort_valid(full_cohort):
    assert validate_cohort(full_cohort.cohort) == []
    ages = column_array(full_cohort.cohort, "child_age")
    assert ages.min() >= 0 and ages.max() <= 15


def test_cluster_sizes_and_order(full_cohort, default_cfg):
    sizes = np.bincount(full_cohort.membership)
    assert sizes.sum() == 55287
    assert np.all(np.abs(sizes - np.array(TABLE4_SIZES) * 55287 / sum(TABLE4_SIZES)) <= 1)
    assert np.all(np.diff(full_cohort.membership) >= 0)  # cluster-major


def test_prevalence_and_missingness(full_cohort):
    y = np.array(full_cohort.cohort.column("outcome"))
    assert abs(y.mean() - 0.48) <= 0.01
    missing = np.mean([v is None for v in full_cohort.cohort.column("mother_age")])
    assert abs(missing - 0.05) < 0.005


def test_deterministic(default_cfg):
    cfg = dataclasses.replace(default_cfg, n=800, seed=3)
    assert generate_with_truth(cfg).cohort == generate_with_truth(cfg).cohort
    other = dataclasses.replace(cfg, seed=4)
    assert generate_with_truth(cfg).cohort != generate_with_truth(other).cohort


def test_zero_n_rejected(default_cfg):
    with pytest.raises(InvalidConfig):
        dataclasses.replace(default_cfg, n=0)


@pytest.mark.parametrize(
    "change",
    [{"prevalence": 1.0}, {"mother_age_missing_rate": 1.5}, {"ordinal_probs": {"msd_ot_contact_level": (0.5, 0.5)}}],
)
def test_invalid_configs(default_cfg, change):
    with pytest.raises(InvalidConfig):
        dataclasses.replace(default_cfg, **change)


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(InvalidConfig):
        SyntheticCohortConfig.from_dict({"n": 10, "global_moments": {}, "bogus": 1})


@pytest.mark.parametrize("mean,sd,lower,upper", [(1.11, 1.75, 0, None), (0.30, 0.84, 0, None), (1.25, 1.04, 1, None), (3.44, 2.94, 0, 15)])
def test_latent_normal_solves_moments(mean, sd, lower, upper):
    mu, sigma = latent_normal(mean, sd, lower, upper)
    m, s = _discrete_moments(mu, sigma, lower, upper)
    assert abs(m - mean) <= 1e-6 * sd and abs(s - sd) <= 1e-6 * sd


def test_sample_count_moments():
    rng = np.random.default_rng(0)
    x = sample_count(rng, 1.11, 1.75, 400_000)
    assert x.min() == 0
    assert abs(x.mean() - 1.11) < 0.01 and abs(x.std() - 1.75) < 0.01


def small_cohort(default_cfg, n=20_000, seed=1):
    return generate_with_truth(dataclasses.replace(default_cfg, n=n, seed=seed)).cohort


def test_planted_zero_signal(default_cfg):
    cohort = small_cohort(default_cfg)
    out = planted_outcome(cohort, {}, 0.48, seed=5)
    assert abs(out.signal.intercept - math.log(0.48 / 0.52)) < 0.03
    assert abs(out.labels.mean() - 0.48) <= 0.01
    half = planted_outcome(cohort, {}, 0.5, seed=5)
    assert abs(half.signal.intercept) < 0.03


def test_planted_strong_signal_auc(default_cfg):
    cohort = small_cohort(default_cfg)
    out = planted_outcome(cohort, {"n_prev_notifications": 4.0}, 0.48, seed=6)
    assert abs(out.labels.mean() - 0.48) <= 0.01
    assert auc(out.signal.linear_score(cohort), out.labels) > 0.9


def test_planted_unknown_column(default_cfg):
    with pytest.raises(InvalidConfig):
        planted_outcome(small_cohort(default_cfg, 200), {"nope": 1.0}, 0.48)


def test_calibration_failure(default_cfg):
    # a huge slope pushes many records past any intercept in [-40, 40]
    cohort = small_cohort(default_cfg, 2000)
    with pytest.raises(CalibrationFailure):
        planted_outcome(cohort, {"n_prev_notifications": 1000.0}, 0.05)


def test_fresh_draws_reuse_signal(default_cfg):
    cfg = dataclasses.replace(default_cfg, n=3000, seed=11)
    first = generate_with_truth(cfg)
    again = generate_with_truth(dataclasses.replace(cfg, seed=12), signal=first.signal)
    assert again.signal is first.signal
    assert 0.4 < np.mean(again.cohort.column("outcome")) < 0.56
