"""RankBoost for bipartite data with threshold weak rankers.

The pair distribution lives on (negative, positive) pairs as an
``n_neg x n_pos`` matrix, so memory is ``O(n_neg * n_pos)``.  Weak rankers
are ``h(x) = 1{x_f > theta}`` (direction +1) or ``1{x_f <= theta}``
(direction -1) with thresholds at midpoints between consecutive distinct
feature values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .core import LabeledDataset, as_batch


@dataclass(frozen=True)
class PairDistribution:
    """Weights ``D[i, j]`` on pair (negative i, positive j); entries sum to 1."""

    weights: NDArray[np.float64]

    def __post_init__(self) -> None:
        W = np.asarray(self.weights, dtype=float)
        if W.ndim != 2 or np.any(W < 0) or not np.isfinite(W).all():
            raise ValueError("pair weights must be a finite nonnegative matrix")
        if abs(W.sum() - 1.0) > 1e-10:
            raise ValueError(f"pair weights sum to {W.sum()!r}, not 1")
        object.__setattr__(self, "weights", W)

    @classmethod
    def uniform(cls, n_negative: int, n_positive: int) -> "PairDistribution":
        return cls(np.full((n_negative, n_positive), 1.0 / (n_negative * n_positive)))


def update_distribution(
    D: PairDistribution, h_negative: ArrayLike, h_positive: ArrayLike, alpha: float
) -> tuple[PairDistribution, float]:
    """``D'(x0, x1) = D(x0, x1) exp(alpha (h(x0) - h(x1))) / Z``; returns ``(D', Z)``."""
    h0 = np.asarray(h_negative, dtype=float)
    h1 = np.asarray(h_positive, dtype=float)
    if D.weights.shape != (h0.size, h1.size):
        raise ValueError(f"weak ranker outputs do not match distribution shape {D.weights.shape}")
    exponent = alpha * (h0[:, None] - h1[None, :])
    if not np.isfinite(exponent).all() or exponent.max() > 700:
        raise FloatingPointError(
            f"update exponent overflows (alpha={alpha!r}, max alpha*dh={np.nanmax(exponent)!r})"
        )
    unnorm = D.weights * np.exp(exponent)
    Z = float(unnorm.sum())
    if not Z > 0 or not math.isfinite(Z):
        raise FloatingPointError(f"normalizer Z={Z!r} is not a positive finite number")
    return PairDistribution(unnorm / Z), Z


@dataclass(frozen=True)
class ThresholdRanker:
    feature: int
    threshold: float
    direction: int  # +1: x > threshold, -1: x <= threshold

    def __call__(self, X: NDArray) -> NDArray[np.float64]:
        above = np.asarray(X)[..., self.feature] > self.threshold
        return (above if self.direction > 0 else ~above).astype(float)


@dataclass
class BoostedRanker:
    rankers: list[ThresholdRanker]
    alphas: list[float]
    n_features: int
    z_values: list[float] = field(default_factory=list)

    def score(self, X: ArrayLike) -> float | NDArray[np.float64]:
        """``H(x) = sum_t alpha_t h_t(x)``."""
        Xb, single = as_batch(X, self.n_features)
        H = np.zeros(Xb.shape[0])
        for h, a in zip(self.rankers, self.alphas):
            H += a * h(Xb)
        return float(H[0]) if single else H

    def truncated(self, T: int) -> "BoostedRanker":
        """The model after its first ``T`` rounds."""
        return BoostedRanker(self.rankers[:T], self.alphas[:T], self.n_features, self.z_values[:T])

    def describe(self) -> str:
        return f"RankBoost(T={len(self.rankers)})"

    def to_dict(self) -> dict:
        return {
            "type": "rankboost",
            "n_features": self.n_features,
            "rankers": [
                {"feature": h.feature, "threshold": h.threshold, "direction": h.direction, "alpha": a}
                for h, a in zip(self.rankers, self.alphas)
            ],
            "z_values": list(self.z_values),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "BoostedRanker":
        rankers = [ThresholdRanker(int(r["feature"]), float(r["threshold"]), int(r["direction"])) for r in d["rankers"]]
        alphas = [float(r["alpha"]) for r in d["rankers"]]
        return cls(rankers, alphas, int(d["n_features"]), [float(z) for z in d.get("z_values", [])])


def score_boosted(model: BoostedRanker, example: ArrayLike) -> float | NDArray[np.float64]:
    return model.score(example)


def _best_threshold(x_neg: NDArray, x_pos: NDArray, W: NDArray, pi_neg: NDArray, pi_pos: NDArray
                    ) -> tuple[float, float, float, float] | None:
    """Best ``x > theta`` split of one feature.

    Returns ``(theta, W_correct, W_wrong, W_tied)`` for the direction-free
    rule ``1{x > theta}``, choosing the threshold with the smallest
    ``W_tied + 2 sqrt(W_correct W_wrong)`` (the optimal Z).
    """
    values = np.unique(np.concatenate([x_neg, x_pos]))
    if values.size < 2:
        return None
    thetas = 0.5 * (values[1:] + values[:-1])
    # pair mass with both sides above theta, via a 2-D suffix sum over sorted order
    on = np.argsort(x_neg, kind="stable")
    op = np.argsort(x_pos, kind="stable")
    S = W[np.ix_(on, op)][::-1, ::-1].cumsum(axis=0).cumsum(axis=1)
    S = np.pad(S, ((1, 0), (1, 0)))
    a_neg = x_neg.size - np.searchsorted(x_neg[on], thetas, side="right")
    a_pos = x_pos.size - np.searchsorted(x_pos[op], thetas, side="right")
    both = S[a_neg, a_pos]
    pos_above = np.pad(np.cumsum(pi_pos[op][::-1]), (1, 0))[a_pos]
    neg_above = np.pad(np.cumsum(pi_neg[on][::-1]), (1, 0))[a_neg]
    correct = np.maximum(pos_above - both, 0.0)   # h(x1)=1, h(x0)=0
    wrong = np.maximum(neg_above - both, 0.0)     # h(x0)=1, h(x1)=0
    tied = np.maximum(1.0 - correct - wrong, 0.0)
    z = tied + 2.0 * np.sqrt(correct * wrong)
    i = int(np.argmin(z))
    return float(thetas[i]), float(correct[i]), float(wrong[i]), float(tied[i])


def fit_rankboost(
    train: LabeledDataset,
    T: int = 50,
    n_candidate_features: int = 10,
    seed: int = 0,
    trace: list | None = None,
) -> BoostedRanker:
    """Run ``T`` boosting rounds.

    Each round draws ``n_candidate_features`` features without replacement,
    picks the threshold rule with the smallest normalizer ``Z`` and sets
    ``alpha = 1/2 ln((W+ + eps) / (W- + eps))`` with ``eps = 1/(n_neg n_pos)``
    (``W+``/``W-``: mass of pairs the rule orders correctly/incorrectly).
    Direction is chosen so that ``alpha >= 0``.  If ``trace`` is a list, the
    distribution after every round is appended to it.
    """
    train.require_both_classes()
    if T < 1:
        raise ValueError("T must be >= 1")
    X = train.features
    neg = X[train.labels == -1]
    pos = X[train.labels == 1]
    n0, n1 = neg.shape[0], pos.shape[0]
    d = X.shape[1]
    k = max(1, min(int(n_candidate_features), d))
    eps = 1.0 / (n0 * n1)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xB0057]))
    D = PairDistribution.uniform(n0, n1)
    rankers, alphas, zs = [], [], []
    for _ in range(T):
        W = D.weights
        pi_neg = W.sum(axis=1)
        pi_pos = W.sum(axis=0)
        best = None
        for f in np.sort(rng.choice(d, size=k, replace=False)):
            found = _best_threshold(neg[:, f], pos[:, f], W, pi_neg, pi_pos)
            if found is None:
                continue
            theta, correct, wrong, tied = found
            z = tied + 2.0 * math.sqrt(correct * wrong)
            if best is None or z < best[0] - 1e-15:
                best = (z, int(f), theta, correct, wrong)
        if best is None:
            h = ThresholdRanker(0, math.inf, 1)  # constant 0: no usable feature
            alpha = 0.0
        else:
            _, f, theta, correct, wrong = best
            direction = 1 if correct >= wrong else -1
            if direction < 0:
                correct, wrong = wrong, correct
            h = ThresholdRanker(f, theta, direction)
            alpha = 0.5 * math.log((correct + eps) / (wrong + eps))
        D, Z = update_distribution(D, h(neg), h(pos), alpha)
        rankers.append(h)
        alphas.append(alpha)
        zs.append(Z)
        if trace is not None:
            trace.append(D)
    return BoostedRanker(rankers, alphas, d, zs)
