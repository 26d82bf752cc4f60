"""Correlation diagnostics and PCA decorrelation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.sparse.linalg import LinearOperator, eigsh

EIGEN_TOL = 1e-10
EIGEN_MAXITER = 10_000


def correlation_matrix(features: ArrayLike, center: bool = True) -> NDArray[np.float64]:
    """Pearson-style correlation ``R_ij = <x_i, x_j> / (|x_i| |x_j|)`` of columns.

    Columns with zero norm get 0 everywhere, including the diagonal.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need a 2-D matrix with at least two rows")
    if center:
        X = X - X.mean(axis=0)
    norms = np.sqrt(np.sum(X * X, axis=0))
    degenerate = norms == 0
    Xn = X / np.where(degenerate, 1.0, norms)
    R = Xn.T @ Xn
    R[degenerate, :] = 0.0
    R[:, degenerate] = 0.0
    np.fill_diagonal(R, np.where(degenerate, 0.0, 1.0))
    return np.clip((R + R.T) / 2.0, -1.0, 1.0)


def correlation_threshold_counts(R: ArrayLike, thresholds: ArrayLike) -> NDArray[np.int64]:
    """Number of unordered off-diagonal pairs with ``|R_ij| >= t`` per threshold."""
    R = np.asarray(R, dtype=float)
    iu = np.triu_indices(R.shape[0], k=1)
    vals = np.sort(np.abs(R[iu]))
    t = np.asarray(thresholds, dtype=float)
    return (vals.size - np.searchsorted(vals, t, side="left")).astype(np.int64)


@dataclass(frozen=True)
class PcaModel:
    mean: NDArray[np.float64]
    components: NDArray[np.float64]  # (d, k), orthonormal columns
    eigenvalues: NDArray[np.float64]  # (k,), nonincreasing

    @property
    def n_components(self) -> int:
        return self.components.shape[1]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PcaModel":
        return cls(
            np.asarray(d["mean"], dtype=float),
            np.asarray(d["components"], dtype=float).reshape(len(d["mean"]), -1),
            np.asarray(d["eigenvalues"], dtype=float),
        )


def _fix_signs(V: NDArray) -> NDArray:
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def fit_pca(features: ArrayLike, k: int) -> PcaModel:
    """Top-``k`` eigenpairs of the covariance ``X^T X / n`` of centred data.

    Uses implicitly restarted Lanczos (ARPACK) on the covariance operator,
    falling back to a dense solve when ``k`` is close to ``d``.  Each
    eigenvector is signed so its largest-magnitude entry is positive.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise ValueError("features must be 2-D")
    n, d = X.shape
    if not 1 <= k <= min(n, d):
        raise ValueError(f"k must be in [1, {min(n, d)}], got {k}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    mean = X.mean(axis=0)
    Xc = X - mean
    if k < d - 1:
        op = LinearOperator((d, d), matvec=lambda v: Xc.T @ (Xc @ v) / n, dtype=float)
        v0 = np.ones(d) / np.sqrt(d)
        vals, vecs = eigsh(op, k=k, which="LA", tol=EIGEN_TOL, maxiter=EIGEN_MAXITER, v0=v0)
    else:
        vals, vecs = np.linalg.eigh(Xc.T @ Xc / n)
    order = np.argsort(-vals, kind="stable")[:k]
    vals = vals[order]
    vecs = vecs[:, order]
    if np.any(vals < -1e-10 * max(1.0, abs(vals[0]))):
        raise ValueError("covariance has a negative eigenvalue beyond rounding")
    # C order so a reloaded model projects bit-identically
    return PcaModel(mean, np.ascontiguousarray(_fix_signs(vecs)), np.clip(vals, 0.0, None))


def pca_project(model: PcaModel, features: ArrayLike) -> NDArray[np.float64]:
    """``(X - mean) @ components`` using the training mean."""
    X = np.asarray(features, dtype=float)
    if X.shape[-1] != model.mean.size:
        raise ValueError(f"expected {model.mean.size} features, got {X.shape[-1]}")
    return (X - model.mean) @ model.components


def total_variance(features: ArrayLike) -> float:
    """Trace of the (1/n) covariance."""
    X = np.asarray(features, dtype=float)
    return float(np.sum((X - X.mean(axis=0)) ** 2) / X.shape[0])


def variance_explained(model: PcaModel, total: float) -> float:
    if total <= 0:
        raise ValueError("total variance must be positive")
    return float(min(1.0, model.eigenvalues.sum() / total))
