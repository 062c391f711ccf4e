import itertools

import numpy as np
import pytest

from riskcluster.errors import CurveTooShort, DimensionMismatch, TooFewPoints
from riskcluster.kmeans import ElbowCurve, assign_nearest, elbow_scan, kmeans_fit, suggest_k

SQUARE = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])


def brute_wcss(points, labels, K):
    return sum(((points[labels == k] - points[labels == k].mean(axis=0)) ** 2).sum() for k in range(K) if np.any(labels == k))


def test_four_point_example():
    m = kmeans_fit(SQUARE, 2, restarts=5, seed=0)
    assert m.wcss == 1.0
    got = sorted(map(tuple, m.centroids))
    assert got == [(0.0, 0.5), (10.0, 0.5)]


def test_k_equals_n():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(12, 3))
    m = kmeans_fit(pts, 12, restarts=2, seed=1)
    assert m.wcss == 0.0
    assert sorted(m.assignment.tolist()) == list(range(12))


def test_k_one_is_mean():
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(50, 2))
    m = kmeans_fit(pts, 1, restarts=1)
    assert np.allclose(m.centroids[0], pts.mean(axis=0), atol=1e-12)
    assert np.isclose(m.wcss, ((pts - pts.mean(axis=0)) ** 2).sum(), rtol=1e-12)


def test_assign_tie_goes_low():
    centroids = np.array([[-1.0, 0.0], [5.0, 5.0], [1.0, 0.0]])
    assert assign_nearest(centroids, np.array([[0.0, 0.0]])).tolist() == [0]
    assert assign_nearest(centroids, np.array([[5.0, 5.0]])).tolist() == [1]


def test_assign_matches_brute_force():
    rng = np.random.default_rng(3)
    c = rng.integers(0, 4, (6, 2)).astype(float)
    p = rng.integers(0, 4, (300, 2)).astype(float)  # many exact ties
    d = ((p[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)
    assert np.array_equal(assign_nearest(c, p), np.argmin(d, axis=1))


def test_assign_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        assign_nearest(np.zeros((2, 3)), np.zeros((4, 2)))


def test_too_few_points():
    with pytest.raises(TooFewPoints):
        kmeans_fit(SQUARE, 5)


def test_model_invariants():
    rng = np.random.default_rng(4)
    pts = rng.normal(size=(400, 3))
    m = kmeans_fit(pts, 5, restarts=3, seed=2)
    assert np.array_equal(assign_nearest(m.centroids, pts), m.assignment)
    own = ((pts - m.centroids[m.assignment]) ** 2).sum()
    assert np.isclose(m.wcss, own, rtol=1e-12)
    assert np.all(m.cluster_sizes() > 0)
    assert m.converged


def test_single_point_moves_do_not_help():
    rng = np.random.default_rng(5)
    pts = rng.normal(size=(30, 2))
    K = 3
    m = kmeans_fit(pts, K, restarts=4, seed=3)
    base = brute_wcss(pts, m.assignment, K)
    for i, k in itertools.product(range(len(pts)), range(K)):
        if k == m.assignment[i] or np.sum(m.assignment == m.assignment[i]) == 1:
            continue
        lab = m.assignment.copy()
        lab[i] = k
        assert brute_wcss(pts, lab, K) >= base - 1e-9


def test_deterministic():
    rng = np.random.default_rng(6)
    pts = rng.normal(size=(300, 2))
    a, b = kmeans_fit(pts, 4, seed=11), kmeans_fit(pts, 4, seed=11)
    assert np.array_equal(a.assignment, b.assignment)
    assert a.wcss == b.wcss


def test_identical_points_warn(caplog):
    pts = np.ones((10, 2))
    m = kmeans_fit(pts, 3, restarts=1)
    assert m.wcss == 0.0
    assert "empty clusters" in caplog.text


# published cluster means of the seven clustering variables
TABLE4_MEANS = np.array([
    [3.44, 1.11, 193.9, 0.30, 28.41, 1.25, 2.31],
    [10.78, 12.50, 979.0, 6.21, 35.47, 2.14, 22.56],
    [11.18, 2.81, 1050.0, 0.70, 39.47, 1.24, 2.96],
    [6.92, 3.91, 594.1, 1.15, 34.10, 4.11, 21.96],
])


def test_elbow_drops_at_published_means():
    rng = np.random.default_rng(0)
    sizes = (236, 55, 179, 82)
    pts = np.vstack([m + 0.2 * rng.normal(size=(s, 7)) for m, s in zip(TABLE4_MEANS, sizes)])
    curve = elbow_scan(pts, 8, restarts=5, seed=0)
    w = np.array(curve.wcss)
    assert curve.ks == tuple(range(1, 9))
    assert np.all(w >= 0)
    ratio = w[1:] / w[:-1]
    assert np.all(ratio[:3] < 0.2)  # K = 2, 3, 4
    assert np.all(ratio[3:] > 0.9)  # K >= 5


def test_suggest_four_for_equidistant_blobs():
    # regular tetrahedron: WCSS falls linearly to K=4, then flattens
    corners = 3.0 * np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    rng = np.random.default_rng(1)
    pts = np.vstack([c + 0.1 * rng.normal(size=(150, 3)) for c in corners])
    curve = elbow_scan(pts, 8, restarts=5, seed=0)
    assert suggest_k(curve) == 4


def test_elbow_ends_at_zero():
    pts = np.random.default_rng(1).normal(size=(6, 2))
    curve = elbow_scan(pts, 6, restarts=3)
    assert curve.wcss[-1] == 0.0


def test_elbow_single_blob_has_no_collapse():
    pts = np.random.default_rng(2).normal(size=(500, 2))
    w = np.array(elbow_scan(pts, 5, restarts=3).wcss)
    assert np.all(np.diff(w) <= 0)
    assert w[-1] / w[0] > 0.05


def test_suggest_k_example():
    curve = ElbowCurve((1, 2, 3, 4, 5), (100.0, 40.0, 20.0, 15.0, 13.0))
    assert suggest_k(curve) == 2


def test_suggest_k_linear_ties():
    assert suggest_k([(k, 100.0 - 10 * k) for k in range(1, 7)]) == 2


def test_suggest_k_short():
    with pytest.raises(CurveTooShort):
        suggest_k([(1, 5.0), (2, 1.0)])
