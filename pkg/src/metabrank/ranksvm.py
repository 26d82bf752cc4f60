"""Ranking SVM on bipartite pairs.

Minimises ``1/2 |w|^2 + C * sum_{(i+, j-)} max(0, 1 - (s(x_i) - s(x_j)))``
over all (positive, negative) pairs by mini-batch stochastic subgradient
descent with step ``1 / (lambda t)``, ``lambda = 1 / (C * n_pairs)``, and a
projection onto the ball of radius ``1 / sqrt(lambda)``.  The RBF variant
runs the same iteration on the coefficients of ``w = sum_i beta_i phi(x_i)``.

After every epoch the exact objective of the current and the averaged
iterate is evaluated; the best iterate seen (starting from ``w = 0``) is
returned, so the recorded best-so-far objective never increases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .core import LabeledDataset, as_batch
from .treerank.leafrank import rbf_kernel


@dataclass
class RankSvmModel:
    kernel: str
    C: float
    n_features: int
    weights: NDArray[np.float64] | None = None
    support: NDArray[np.float64] | None = None
    beta: NDArray[np.float64] | None = None
    gamma: float | None = None
    history: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.C > 0:
            raise ValueError("C must be positive")
        if self.kernel == "rbf":
            if self.gamma is None or not self.gamma > 0:
                raise ValueError("gamma must be positive for the RBF kernel")
        elif self.kernel != "linear":
            raise ValueError(f"unknown kernel {self.kernel!r}")

    def score(self, X: ArrayLike) -> float | NDArray[np.float64]:
        Xb, single = as_batch(X, self.n_features)
        if self.kernel == "linear":
            s = Xb @ self.weights
        else:
            s = rbf_kernel(Xb, self.support, self.gamma) @ self.beta
        return float(s[0]) if single else s

    def norm_squared(self) -> float:
        if self.kernel == "linear":
            return float(self.weights @ self.weights)
        K = rbf_kernel(self.support, self.support, self.gamma)
        return float(self.beta @ K @ self.beta)

    def describe(self) -> str:
        extra = f", gamma={self.gamma}" if self.kernel == "rbf" else ""
        return f"RankSVM(kernel={self.kernel}, C={self.C}{extra})"

    def to_dict(self) -> dict:
        d = {"type": "ranksvm", "kernel": self.kernel, "C": self.C, "n_features": self.n_features,
             "history": list(self.history)}
        if self.kernel == "linear":
            d["weights"] = self.weights.tolist()
        else:
            d.update(gamma=self.gamma, support=self.support.tolist(), beta=self.beta.tolist())
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "RankSvmModel":
        n = int(d["n_features"])
        if d["kernel"] == "linear":
            return cls("linear", float(d["C"]), n, weights=np.asarray(d["weights"], dtype=float),
                       history=list(d.get("history", [])))
        return cls("rbf", float(d["C"]), n,
                   support=np.asarray(d["support"], dtype=float).reshape(-1, n),
                   beta=np.asarray(d["beta"], dtype=float), gamma=float(d["gamma"]),
                   history=list(d.get("history", [])))


def score_ranksvm(model: RankSvmModel, example: ArrayLike) -> float | NDArray[np.float64]:
    return model.score(example)


def _hinge_sum(s: NDArray, y: NDArray) -> float:
    margins = s[y == 1][:, None] - s[y == -1][None, :]
    return float(np.sum(np.maximum(0.0, 1.0 - margins)))


def ranksvm_objective(model: RankSvmModel, train: LabeledDataset) -> float:
    """``1/2 |w|^2 + C * sum of pair hinge losses`` on ``train``."""
    if train.n_features != model.n_features:
        raise ValueError(f"model has {model.n_features} features, data has {train.n_features}")
    s = np.asarray(model.score(train.features))
    return 0.5 * model.norm_squared() + model.C * _hinge_sum(s, train.labels)


def fit_ranksvm(
    train: LabeledDataset,
    C: float = 1.0,
    kernel: str = "linear",
    gamma: float | None = None,
    epochs: int = 200,
    batch_size: int = 128,
    steps_per_epoch: int | None = None,
    tol: float = 1e-6,
    seed: int = 0,
) -> RankSvmModel:
    """Train a bipartite Ranking SVM.

    An epoch is ``steps_per_epoch`` mini-batch steps (default: enough
    batches to cover ``n`` pairs).  Training stops after ``epochs`` epochs
    or once the epoch objective changes by less than ``tol`` relatively.
    """
    train.require_both_classes()
    if not C > 0:
        raise ValueError("C must be positive")
    if kernel == "rbf" and (gamma is None or not gamma > 0):
        raise ValueError("gamma must be positive for the RBF kernel")
    if kernel not in ("linear", "rbf"):
        raise ValueError(f"unknown kernel {kernel!r}")
    X = train.features
    y = train.labels
    n, d = X.shape
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == -1)
    n_pairs = pos.size * neg.size
    lam = 1.0 / (C * n_pairs)
    radius = 1.0 / math.sqrt(lam)
    steps_per_epoch = steps_per_epoch or max(1, math.ceil(n / batch_size))
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5F3]))

    linear = kernel == "linear"
    K = None if linear else rbf_kernel(X, X, gamma)
    # iterate: w (linear) or beta (kernel); f holds the current training scores
    theta = np.zeros(d if linear else n)
    avg = np.zeros_like(theta)

    def scores(t: NDArray) -> NDArray:
        return X @ t if linear else K @ t

    def objective(t: NDArray, s: NDArray) -> float:
        norm2 = float(t @ t) if linear else float(t @ s)
        return 0.5 * norm2 + C * _hinge_sum(s, y)

    best_theta = theta.copy()
    best_obj = objective(theta, scores(theta))
    history = [best_obj]
    prev = best_obj
    step = 0
    for _ in range(epochs):
        for _ in range(steps_per_epoch):
            step += 1
            eta = 1.0 / (lam * step)
            i = pos[rng.integers(0, pos.size, size=batch_size)]
            j = neg[rng.integers(0, neg.size, size=batch_size)]
            s = scores(theta)
            viol = s[i] - s[j] < 1.0
            theta *= 1.0 - 1.0 / step
            if viol.any():
                if linear:
                    theta += (eta / batch_size) * (X[i[viol]].sum(axis=0) - X[j[viol]].sum(axis=0))
                else:
                    counts = np.bincount(i[viol], minlength=n) - np.bincount(j[viol], minlength=n)
                    theta += (eta / batch_size) * counts
            s = scores(theta)
            norm = math.sqrt(max(float(theta @ theta) if linear else float(theta @ s), 0.0))
            if norm > radius:
                theta *= radius / norm
            avg += (theta - avg) / step
        current = objective(theta, scores(theta))
        averaged = objective(avg, scores(avg))
        for cand, obj in ((theta, current), (avg, averaged)):
            if obj < best_obj:
                best_obj, best_theta = obj, cand.copy()
        history.append(best_obj)
        if abs(prev - current) <= tol * max(abs(prev), 1e-300):
            break
        prev = current

    if linear:
        return RankSvmModel("linear", C, d, weights=best_theta, history=history)
    nz = np.flatnonzero(best_theta != 0)
    return RankSvmModel("rbf", C, d, support=X[nz].copy(), beta=best_theta[nz].copy(),
                        gamma=gamma, history=history)
