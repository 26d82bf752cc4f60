"""Shared domain types and ranking metrics.

Everything in the package passes data around as a :class:`LabeledDataset`
and every trained model satisfies the :class:`Scorer` protocol.  The metric
functions here (ROC, AUC, Kendall tau) are pure and operate on plain score
and label vectors.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import numpy as np
from numpy.typing import ArrayLike, NDArray


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix with ``{-1, +1}`` labels and named columns.

    Attributes
    ----------
    features : (n, d) float array
    labels : (n,) int array with entries in {-1, +1}
    feature_names : tuple of d distinct strings
    """

    features: NDArray[np.float64]
    labels: NDArray[np.int64]
    feature_names: tuple[str, ...]

    def __post_init__(self) -> None:
        X = np.array(self.features, dtype=float)
        if X.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {X.shape}")
        y = np.asarray(self.labels)
        if y.shape != (X.shape[0],):
            raise ValueError(
                f"labels must have shape ({X.shape[0]},), got {y.shape}"
            )
        if not np.all((y == 1) | (y == -1)):
            raise ValueError("labels must be -1 or +1")
        names = tuple(str(s) for s in self.feature_names)
        if len(names) != X.shape[1]:
            raise ValueError(
                f"expected {X.shape[1]} feature names, got {len(names)}"
            )
        if len(set(names)) != len(names):
            raise ValueError("feature names must be distinct")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain non-finite values")
        X.setflags(write=False)
        y = y.astype(np.int64)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", names)

    @classmethod
    def from_arrays(cls, features: ArrayLike, labels: ArrayLike,
                    feature_names: Sequence[str] | None = None) -> "LabeledDataset":
        """Build a dataset, naming columns ``f0, f1, ...`` when no names are given."""
        X = np.asarray(features, dtype=float)
        if feature_names is None:
            feature_names = tuple(f"f{i}" for i in range(X.shape[1] if X.ndim == 2 else 0))
        return cls(X, np.asarray(labels), tuple(feature_names))

    @property
    def n_examples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_positive(self) -> int:
        return int(np.sum(self.labels == 1))

    @property
    def n_negative(self) -> int:
        return int(np.sum(self.labels == -1))

    def subset(self, rows: ArrayLike) -> "LabeledDataset":
        """Rows selected by index or boolean mask (repeats allowed)."""
        rows = np.asarray(rows)
        return LabeledDataset(self.features[rows], self.labels[rows], self.feature_names)

    def select_features(self, columns: Sequence[int]) -> "LabeledDataset":
        columns = np.asarray(columns, dtype=int)
        return LabeledDataset(
            self.features[:, columns],
            self.labels,
            tuple(self.feature_names[c] for c in columns),
        )

    def require_both_classes(self) -> None:
        """Raise ``ValueError`` unless both classes are present."""
        if self.n_positive == 0 or self.n_negative == 0:
            raise ValueError(
                f"training requires both classes, got {self.n_positive} positive "
                f"and {self.n_negative} negative examples"
            )


@runtime_checkable
class Scorer(Protocol):
    """A trained scoring function ``s : X -> R``.

    ``score`` accepts one example (1-D) or a batch (2-D) and returns a float
    or a 1-D array respectively.  Implementations are deterministic.
    """

    def score(self, X: ArrayLike) -> float | NDArray[np.float64]: ...

    def describe(self) -> str: ...


def as_batch(X: ArrayLike, n_features: int) -> tuple[NDArray[np.float64], bool]:
    """Coerce ``X`` to a 2-D batch; second value says whether it was 1-D."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ValueError(
            f"expected examples of dimension {n_features}, got shape {X.shape}"
        )
    return X, single


def _check_scores_labels(scores: ArrayLike, labels: ArrayLike) -> tuple[NDArray, NDArray]:
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ValueError(f"{s.size} scores but {y.size} labels")
    if not np.all((y == 1) | (y == -1)):
        raise ValueError("labels must be -1 or +1")
    if not np.all(y == 1) and not np.all(y == -1):
        return s, y
    raise ValueError("ROC/AUC undefined: labels contain a single class")


@dataclass(frozen=True)
class RocCurve:
    """Empirical ROC curve.

    ``fpr[i]``/``tpr[i]`` are the rates obtained by predicting positive for
    every example with score ``>= thresholds[i]``.  The first threshold is
    ``+inf`` so the curve starts at (0, 0).
    """

    fpr: NDArray[np.float64]
    tpr: NDArray[np.float64]
    thresholds: NDArray[np.float64]

    def __post_init__(self) -> None:
        fpr = np.asarray(self.fpr, dtype=float)
        tpr = np.asarray(self.tpr, dtype=float)
        thr = np.asarray(self.thresholds, dtype=float)
        if not (fpr.shape == tpr.shape == thr.shape) or fpr.ndim != 1 or fpr.size < 2:
            raise ValueError("fpr, tpr and thresholds must be equal-length 1-D arrays")
        if (fpr[0], tpr[0]) != (0.0, 0.0) or (fpr[-1], tpr[-1]) != (1.0, 1.0):
            raise ValueError("ROC curve must run from (0, 0) to (1, 1)")
        if np.any(np.diff(fpr) < 0) or np.any(np.diff(tpr) < 0):
            raise ValueError("ROC rates must be nondecreasing")
        for a in (fpr, tpr, thr):
            a.setflags(write=False)
        object.__setattr__(self, "fpr", fpr)
        object.__setattr__(self, "tpr", tpr)
        object.__setattr__(self, "thresholds", thr)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def to_csv(self, path: str | Path) -> None:
        """Write ``threshold,fpr,tpr`` rows."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["threshold", "fpr", "tpr"])
            for t, f, p in zip(self.thresholds, self.fpr, self.tpr):
                writer.writerow([repr(float(t)), repr(float(f)), repr(float(p))])

    @classmethod
    def from_csv(cls, path: str | Path) -> "RocCurve":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["threshold", "fpr", "tpr"]:
                raise ValueError(f"unexpected ROC CSV header {header}")
            rows = [[float(v) for v in row] for row in reader]
        arr = np.array(rows, dtype=float).reshape(-1, 3)
        return cls(fpr=arr[:, 1], tpr=arr[:, 2], thresholds=arr[:, 0])


def roc_curve(scores: ArrayLike, labels: ArrayLike) -> RocCurve:
    """Empirical ROC curve with one point per distinct score.

    Tied scores cross the threshold together, so a tie group containing both
    classes contributes a single diagonal segment.
    """
    s, y = _check_scores_labels(scores, labels)
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    pos = (y[order] == 1).astype(np.int64)
    neg = 1 - pos
    # last index of each tie group in descending order
    ends = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    tp = np.cumsum(pos)[ends]
    fp = np.cumsum(neg)[ends]
    n_pos, n_neg = tp[-1], fp[-1]
    return RocCurve(
        fpr=np.r_[0.0, fp / n_neg],
        tpr=np.r_[0.0, tp / n_pos],
        thresholds=np.r_[np.inf, s_sorted[ends]],
    )


def auc_from_roc(curve: RocCurve) -> float:
    """Trapezoidal area under a ROC curve."""
    dx = np.diff(curve.fpr)
    return float(np.sum(dx * (curve.tpr[1:] + curve.tpr[:-1])) / 2.0)


def auc_pairwise(scores: ArrayLike, labels: ArrayLike) -> float:
    """Fraction of correctly ordered (positive, negative) pairs, ties count 1/2.

    The pair counts are accumulated in integers, so the returned value is the
    correctly rounded ratio.
    """
    s, y = _check_scores_labels(scores, labels)
    neg = np.sort(s[y == -1])
    pos = s[y == 1]
    below = np.searchsorted(neg, pos, side="left")
    below_or_tied = np.searchsorted(neg, pos, side="right")
    twice_concordant = int(np.sum(below, dtype=np.int64) + np.sum(below_or_tied, dtype=np.int64))
    return twice_concordant / (2 * pos.size * neg.size)


def auc(scores: ArrayLike, labels: ArrayLike) -> float:
    """Alias for :func:`auc_pairwise`; the usual entry point for evaluation."""
    return auc_pairwise(scores, labels)


def kendall_tau(ranking_a: ArrayLike, ranking_b: ArrayLike) -> float:
    """Kendall tau ``(P - Q) / (P + Q)`` between two score vectors.

    Pairs tied in either ranking are counted as neither concordant nor
    discordant.
    """
    a = np.asarray(ranking_a, dtype=float).ravel()
    b = np.asarray(ranking_b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("need at least two items")
    iu, ju = np.triu_indices(a.size, k=1)
    prod = np.sign(a[iu] - a[ju]) * np.sign(b[iu] - b[ju])
    concordant = int(np.sum(prod > 0))
    discordant = int(np.sum(prod < 0))
    if concordant + discordant == 0:
        raise ValueError("Kendall tau undefined: every pair is tied")
    return (concordant - discordant) / (concordant + discordant)
