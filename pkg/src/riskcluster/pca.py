"""Principal components of standardized data via cyclic Jacobi rotations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, DimensionMismatch, NotStandardized
from .preprocess import DesignMatrix, Standardizer


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix.

    Cyclic-by-row Jacobi: each sweep annihilates every off-diagonal pair
    once. Stops when the off-diagonal Frobenius norm drops to ``tol``.
    Returns ``(eigenvalues, eigenvectors)`` unsorted, eigenvectors in columns.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {a.shape}")
    p = a.shape[0]
    a = (a + a.T) / 2
    v = np.eye(p)

    mask = ~np.eye(p, dtype=bool)

    def off(m):
        # summed directly: |A|^2 - |diag A|^2 cancels badly near convergence
        return float(np.sqrt(np.sum(m[mask] ** 2)))

    for _ in range(max_sweeps):
        if off(a) <= tol:
            return np.diag(a).copy(), v
        for i in range(p - 1):
            for j in range(i + 1, p):
                aij = a[i, j]
                if aij == 0.0:
                    continue
                tau = (a[j, j] - a[i, i]) / (2.0 * aij)
                if abs(tau) > 1e150:
                    t = 0.5 / tau  # limit of the formula below without overflow
                elif tau >= 0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                ci, cj = a[:, i].copy(), a[:, j].copy()
                a[:, i] = c * ci - s * cj
                a[:, j] = s * ci + c * cj
                ri, rj = a[i, :].copy(), a[j, :].copy()
                a[i, :] = c * ri - s * rj
                a[j, :] = s * ri + c * rj
                a[i, j] = a[j, i] = 0.0
                vi, vj = v[:, i].copy(), v[:, j].copy()
                v[:, i] = c * vi - s * vj
                v[:, j] = s * vi + c * vj
    if off(a) <= tol:
        return np.diag(a).copy(), v
    raise ConvergenceFailure(f"Jacobi did not reach off-diagonal norm {tol} in {max_sweeps} sweeps")


@dataclass(frozen=True)
class PcaModel:
    eigenvalues: np.ndarray  # descending
    loadings: np.ndarray  # p x p, principal directions in columns
    columns: tuple[str, ...]
    covariance: np.ndarray
    n_selected: int
    standardizer: Standardizer | None = None

    @property
    def p(self) -> int:
        return len(self.eigenvalues)


def fit_pca(m: DesignMatrix | np.ndarray, standardizer: Standardizer | None = None) -> PcaModel:
    """Decompose the covariance ``X'X / (n-1)`` of already standardized data.

    Each loading is signed so that its largest-magnitude entry is positive.
    The Kaiser count is stored on the model as ``n_selected``.
    """
    if isinstance(m, DesignMatrix):
        x, columns = m.values, m.columns
    else:
        x = np.asarray(m, dtype=float)
        columns = tuple(f"x{i}" for i in range(x.shape[1]))
    n, p = x.shape
    if n <= p:
        raise DimensionMismatch(f"need n > p, got n={n}, p={p}")
    means = x.mean(axis=0)
    if np.any(np.abs(means) > 1e-6):
        bad = [columns[i] for i in np.nonzero(np.abs(means) > 1e-6)[0]]
        raise NotStandardized(f"columns not centred: {bad}")
    cov = x.T @ x / (n - 1)
    cov = (cov + cov.T) / 2
    vals, vecs = jacobi_eigh(cov)
    order = np.argsort(-vals, kind="stable")
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order]
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.where(vecs[pivot, np.arange(p)] < 0, -1.0, 1.0)
    vecs = vecs * signs
    return PcaModel(vals, vecs, tuple(columns), cov, int(np.sum(vals > 1.0)), standardizer)


def select_components_kaiser(model: PcaModel | np.ndarray) -> int:
    """Number of eigenvalues strictly above 1."""
    vals = model.eigenvalues if isinstance(model, PcaModel) else np.asarray(model)
    return int(np.sum(vals > 1.0))


def project(model: PcaModel, m: DesignMatrix | np.ndarray, k: int | None = None) -> np.ndarray:
    """Scores of ``m`` on the first ``k`` principal directions (default: ``n_selected``)."""
    k = model.n_selected if k is None else k
    if isinstance(m, DesignMatrix):
        x = m.select(model.columns).values
    else:
        x = np.asarray(m, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.p:
        raise DimensionMismatch(f"data has {x.shape[-1]} columns, model has {model.p}")
    if not 0 <= k <= model.p:
        raise DimensionMismatch(f"k={k} outside 0..{model.p}")
    return x @ model.loadings[:, :k]


def reconstruct(model: PcaModel, scores: np.ndarray) -> np.ndarray:
    k = scores.shape[1]
    return scores @ model.loadings[:, :k].T
