import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskcluster.errors import SingleClass, UndefinedRate
from riskcluster.metrics import (
    ConfusionMatrix,
    auc,
    auc_concordance,
    confusion_at_threshold,
    roc_curve,
    tnr,
    tpr,
    youden_threshold,
)

EXAMPLE_SCORES = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4]
EXAMPLE_LABELS = [1, 1, 0, 1, 0, 0]


def test_confusion_basic():
    cm = confusion_at_threshold([0.9, 0.1], [1, 0], 0.5)
    assert (cm.tp, cm.tn, cm.fp, cm.fn) == (1, 1, 0, 0)


def test_confusion_extremes():
    s, y = [0.2, 0.5, 0.7], [1, 0, 1]
    cm = confusion_at_threshold(s, y, 0.71)
    assert cm.tp == cm.fp == 0
    cm = confusion_at_threshold(s, y, 0.2)
    assert cm.fn == cm.tn == 0
    assert cm.n == 3


def test_rates():
    assert tpr(ConfusionMatrix(3, 0, 0, 1, 0.5)) == 0.75
    assert tnr(ConfusionMatrix(0, 2, 2, 0, 0.5)) == 0.5
    with pytest.raises(UndefinedRate):
        tpr(ConfusionMatrix(0, 1, 1, 0, 0.5))
    with pytest.raises(UndefinedRate):
        tnr(ConfusionMatrix(1, 0, 0, 1, 0.5))


def test_rates_at_infinite_thresholds():
    s, y = np.array([0.1, 0.4, 0.8]), np.array([0, 1, 1])
    assert tpr(confusion_at_threshold(s, y, -np.inf)) == 1.0
    assert tnr(confusion_at_threshold(s, y, np.inf)) == 1.0


def test_worked_example():
    assert auc(EXAMPLE_SCORES, EXAMPLE_LABELS) == 8 / 9
    assert auc_concordance(EXAMPLE_SCORES, EXAMPLE_LABELS) == 8 / 9


def test_perfect_separation():
    curve = roc_curve([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
    assert (0.0, 1.0) in curve.points()
    assert auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0


def test_all_scores_equal():
    curve = roc_curve([0.3] * 5, [1, 0, 1, 0, 0])
    assert curve.points() == [(0.0, 0.0), (1.0, 1.0)]
    assert auc([0.3] * 5, [1, 0, 1, 0, 0]) == 0.5


def test_flipped_labels():
    rng = np.random.default_rng(0)
    s, y = rng.random(60).round(1), rng.integers(0, 2, 60)
    assert abs(auc(s, 1 - y) - (1 - auc(s, y))) <= 1e-12


def test_single_class():
    with pytest.raises(SingleClass):
        roc_curve([0.1, 0.2], [1, 1])
    with pytest.raises(SingleClass):
        auc_concordance([0.1, 0.2], [0, 0])


def test_curve_matches_brute_sweep():
    rng = np.random.default_rng(1)
    s = rng.integers(0, 15, 120) / 10
    y = rng.integers(0, 2, 120)
    curve = roc_curve(s, y)
    thresholds = np.r_[np.inf, np.sort(np.unique(s))[::-1]]
    assert np.array_equal(curve.thresholds, thresholds)
    for t, fpr_, tpr_ in zip(curve.thresholds, curve.fpr, curve.tpr):
        cm = confusion_at_threshold(s, y, t)
        assert fpr_ == cm.fp / (cm.fp + cm.tn)
        assert tpr_ == cm.tp / (cm.tp + cm.fn)


labelled = st.integers(2, 80).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(0, 6), min_size=n, max_size=n),
        st.lists(st.integers(0, 1), min_size=n, max_size=n),
    )
).filter(lambda t: 0 < sum(t[1]) < len(t[1]))


@settings(max_examples=300, deadline=None)
@given(labelled)
def test_curve_shape(data):
    s, y = data
    curve = roc_curve(np.array(s) / 6, y)
    assert np.all(np.diff(curve.fpr) >= 0) and np.all(np.diff(curve.tpr) >= 0)
    assert curve.points()[0] == (0.0, 0.0) and curve.points()[-1] == (1.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(labelled)
def test_auc_invariant_under_monotone_transform(data):
    s, y = data
    s = np.array(s, dtype=float)
    assert auc(s, y) == auc(np.exp(3 * s) - 7, y)


def test_youden():
    s = np.array([0.1, 0.3, 0.35, 0.6, 0.8, 0.9])
    y = np.array([0, 0, 1, 0, 1, 1])
    t = youden_threshold(s, y)
    best = max(tpr(confusion_at_threshold(s, y, u)) + tnr(confusion_at_threshold(s, y, u)) for u in s)
    got = tpr(confusion_at_threshold(s, y, t)) + tnr(confusion_at_threshold(s, y, t))
    assert got == best
