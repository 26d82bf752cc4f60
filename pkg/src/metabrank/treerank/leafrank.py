"""Cost-sensitive LeafRank splitters.

A LeafRank is a binary classifier trained on the examples of one tree cell
with weight ``1 - omega`` on every positive and ``omega`` on every negative,
where ``omega`` is the positive rate of the cell.  Minimising the weighted
misclassification error minimises the split cost ``L_{C,omega}``.  The
classifier's positive region becomes the left (higher-scored) child.

Three variants are provided: a weighted-Gini CART tree, an L1-penalized
linear SVM and an RBF-kernel SVM.  Trained rules are stored as plain arrays
so they serialize to JSON and score without scikit-learn objects.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from sklearn.exceptions import ConvergenceWarning
from sklearn.svm import SVC, LinearSVC

from ..core import LabeledDataset
from ..folds import stratified_folds

LEAFRANK_KINDS = ("cart", "l1", "rbf")


def split_cost(
    labels: ArrayLike | LabeledDataset,
    region_mask: ArrayLike,
    omega: float,
    n_total: int | None = None,
) -> float:
    """``L_{C,omega}(Gamma)`` for the examples of one cell.

    ``region_mask[i]`` says whether example ``i`` of the cell lies in
    ``Gamma``.  ``n_total`` is the size of the whole training set (the
    ``1/n`` normaliser); it defaults to the cell size.
    """
    y = labels.labels if isinstance(labels, LabeledDataset) else np.asarray(labels)
    inside = np.asarray(region_mask, dtype=bool)
    if inside.shape != y.shape:
        raise ValueError("mask and labels differ in length")
    if not 0.0 <= omega <= 1.0:
        raise ValueError("omega must lie in [0, 1]")
    n = y.size if n_total is None else int(n_total)
    missed_pos = int(np.sum(~inside & (y == 1)))
    captured_neg = int(np.sum(inside & (y == -1)))
    return 2.0 * (1.0 - omega) / n * missed_pos + 2.0 * omega / n * captured_neg


def class_weights(y: NDArray, omega: float) -> NDArray[np.float64]:
    return np.where(y == 1, 1.0 - omega, omega)


# --------------------------------------------------------------------------
# trained rules


class Rule:
    kind: str

    def goes_left(self, X: NDArray) -> NDArray[np.bool_]:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    @property
    def weight_vector(self) -> NDArray[np.float64] | None:
        return None


@dataclass(frozen=True)
class ConstantRule(Rule):
    left: bool
    kind: str = "constant"

    def goes_left(self, X: NDArray) -> NDArray[np.bool_]:
        return np.full(np.asarray(X).shape[0], self.left)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "left": self.left}


@dataclass(frozen=True)
class LinearRule(Rule):
    weights: NDArray[np.float64]
    intercept: float
    kind: str = "l1"

    def decision(self, X: NDArray) -> NDArray[np.float64]:
        return np.asarray(X, dtype=float) @ self.weights + self.intercept

    def goes_left(self, X: NDArray) -> NDArray[np.bool_]:
        return self.decision(X) > 0

    @property
    def weight_vector(self) -> NDArray[np.float64]:
        return self.weights

    def to_dict(self) -> dict:
        return {"kind": self.kind, "weights": self.weights.tolist(), "intercept": self.intercept}


def rbf_kernel(A: NDArray, B: NDArray, gamma: float) -> NDArray[np.float64]:
    """``exp(-gamma * |a - b|^2)`` for all row pairs."""
    return np.exp(-gamma * squared_distances(A, B))


def squared_distances(A: NDArray, B: NDArray) -> NDArray[np.float64]:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    d2 = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * (A @ B.T)
    return np.maximum(d2, 0.0)


@dataclass(frozen=True)
class KernelRule(Rule):
    support: NDArray[np.float64]
    coef: NDArray[np.float64]
    intercept: float
    gamma: float
    kind: str = "rbf"

    def decision(self, X: NDArray) -> NDArray[np.float64]:
        return rbf_kernel(X, self.support, self.gamma) @ self.coef + self.intercept

    def goes_left(self, X: NDArray) -> NDArray[np.bool_]:
        return self.decision(X) > 0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "support": self.support.tolist(),
            "coef": self.coef.tolist(),
            "intercept": self.intercept,
            "gamma": self.gamma,
        }


@dataclass(frozen=True)
class CartRule(Rule):
    """Binary decision tree; node ``i`` is a leaf when ``left_child[i] < 0``.

    Internal nodes send ``x[feature] <= threshold`` to ``left_child``.
    ``leaf_in_region`` marks leaves predicting the positive class.
    """

    feature: NDArray[np.int64]
    threshold: NDArray[np.float64]
    left_child: NDArray[np.int64]
    right_child: NDArray[np.int64]
    leaf_in_region: NDArray[np.bool_]
    kind: str = "cart"

    def goes_left(self, X: NDArray) -> NDArray[np.bool_]:
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.left_child[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            cur = node[rows]
            go_left = X[rows, self.feature[cur]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left_child[cur], self.right_child[cur])
            active[rows] = self.left_child[node[rows]] >= 0
        return self.leaf_in_region[node]

    @property
    def node_count(self) -> int:
        return self.feature.size

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left_child": self.left_child.tolist(),
            "right_child": self.right_child.tolist(),
            "leaf_in_region": self.leaf_in_region.tolist(),
        }


def rule_from_dict(d: Mapping[str, Any]) -> Rule:
    kind = d["kind"]
    if kind == "constant":
        return ConstantRule(bool(d["left"]))
    if kind == "l1":
        return LinearRule(np.asarray(d["weights"], dtype=float), float(d["intercept"]))
    if kind == "rbf":
        support = np.asarray(d["support"], dtype=float)
        return KernelRule(
            support.reshape(len(d["coef"]), -1),
            np.asarray(d["coef"], dtype=float),
            float(d["intercept"]),
            float(d["gamma"]),
        )
    if kind == "cart":
        return CartRule(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left_child"], dtype=np.int64),
            np.asarray(d["right_child"], dtype=np.int64),
            np.asarray(d["leaf_in_region"], dtype=bool),
        )
    raise ValueError(f"unknown rule kind {kind!r}")


# --------------------------------------------------------------------------
# weighted CART


def presort(X: NDArray) -> NDArray[np.int64]:
    """Column-wise argsort, reusable by every CART fit on subsets of ``X``."""
    return np.argsort(X, axis=0, kind="stable")


def _best_gini_split(
    X: NDArray, order: NDArray, wpos: NDArray, wneg: NDArray
) -> tuple[int, float, float] | None:
    """Best (feature, threshold, score) over presorted node columns.

    ``order`` is (m, d): node rows sorted per feature.  Maximises
    ``(p_l^2 + n_l^2) / W_l + (p_r^2 + n_r^2) / W_r``, equivalent to minimising
    the weighted Gini impurity of the children.
    """
    m, d = order.shape
    cols = np.arange(d)
    vals = X[order, cols]
    cp = np.cumsum(wpos[order], axis=0)[:-1]
    cn = np.cumsum(wneg[order], axis=0)[:-1]
    P, N = wpos[order[:, 0]].sum(), wneg[order[:, 0]].sum()
    valid = vals[1:] > vals[:-1]
    wl = cp + cn
    wr = (P + N) - wl
    valid &= (wl > 0) & (wr > 0)
    if not valid.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        score = (cp**2 + cn**2) / wl + ((P - cp) ** 2 + (N - cn) ** 2) / wr
    score = np.where(valid, score, -np.inf)
    # row-major argmax over (feature, position): lowest feature index wins ties
    flat = np.argmax(score.T)
    f, i = divmod(int(flat), m - 1)
    parent = (P**2 + N**2) / (P + N)
    if score[i, f] <= parent * (1 + 1e-12):
        return None
    return f, 0.5 * (vals[i, f] + vals[i + 1, f]), float(score[i, f])


def fit_cart(
    X: NDArray,
    y: NDArray,
    sample_weight: NDArray,
    max_depth: int,
    min_split: int = 30,
    order: NDArray | None = None,
) -> CartRule:
    """Depth-limited weighted-Gini classification tree.

    ``order`` may be a presorted column order of ``X`` (see :func:`presort`)
    to avoid re-sorting for every node.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if order is None:
        order = presort(X)
    wpos = np.where(y == 1, sample_weight, 0.0)
    wneg = np.where(y == 1, 0.0, sample_weight)

    feature, threshold, left, right, in_region = [], [], [], [], []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        in_region.append(False)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.ones(n, dtype=bool), 0)]
    while stack:
        node, member, depth = stack.pop()
        rows = np.flatnonzero(member)
        p, q = wpos[rows].sum(), wneg[rows].sum()
        in_region[node] = bool(p > q)
        if depth >= max_depth or rows.size < min_split or p == 0 or q == 0:
            continue
        sub = order.T[member[order.T]].reshape(d, rows.size).T
        best = _best_gini_split(X, sub, wpos, wneg)
        if best is None:
            continue
        f, t, _ = best
        feature[node], threshold[node] = f, t
        go_left = X[:, f] <= t
        lchild, rchild = new_node(), new_node()
        left[node], right[node] = lchild, rchild
        stack.append((rchild, member & ~go_left, depth + 1))
        stack.append((lchild, member & go_left, depth + 1))
    return CartRule(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=float),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(in_region, dtype=bool),
    )


# --------------------------------------------------------------------------
# training entry points


@dataclass(frozen=True)
class LeafRankSpec:
    """A LeafRank variant with its hyperparameter grid.

    The grid is selected by ``cv_folds``-fold cross validation on split
    cost.  A single-entry grid skips the selection.
    """

    kind: str
    grid: tuple[Mapping[str, float], ...]
    cv_folds: int = 3
    min_split: int = 30

    def __post_init__(self) -> None:
        if self.kind not in LEAFRANK_KINDS:
            raise ValueError(f"unknown LeafRank {self.kind!r}; expected one of {LEAFRANK_KINDS}")
        if not self.grid:
            raise ValueError("LeafRank grid is empty")
        object.__setattr__(self, "grid", tuple(dict(g) for g in self.grid))

    def with_params(self, params: Mapping[str, float]) -> "LeafRankSpec":
        return LeafRankSpec(self.kind, (dict(params),), self.cv_folds, self.min_split)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "grid": [dict(g) for g in self.grid],
                "cv_folds": self.cv_folds, "min_split": self.min_split}

    @classmethod
    def from_dict(cls, d: Mapping) -> "LeafRankSpec":
        return cls(d["kind"], tuple(d["grid"]), int(d.get("cv_folds", 3)), int(d.get("min_split", 30)))


def exp2_range(lo: int, hi: int, step: int = 2) -> list[float]:
    return [2.0**e for e in range(lo, hi + 1, step)]


CART_DEPTHS = (2, 4, 8)
SVM_C_GRID = tuple(exp2_range(-5, 7))
RBF_WIDTH_GRID = tuple(exp2_range(-5, 1))


def default_leafrank(kind: str) -> LeafRankSpec:
    """LeafRank grids used for model selection inside a forest."""
    if kind == "cart":
        grid = [{"max_depth": d} for d in CART_DEPTHS]
    elif kind == "l1":
        grid = [{"C": c} for c in SVM_C_GRID]
    elif kind == "rbf":
        grid = [{"C": c, "width": w} for c, w in itertools.product(SVM_C_GRID, RBF_WIDTH_GRID)]
    else:
        raise ValueError(f"unknown LeafRank {kind!r}")
    return LeafRankSpec(kind, tuple(grid))


def width_to_gamma(width: float) -> float:
    """RBF width ``sigma`` to ``gamma`` in ``exp(-gamma |x - x'|^2)``."""
    return 1.0 / (2.0 * width * width)


@dataclass
class CellContext:
    """Per-tree cache shared by the LeafRank fits of all its cells.

    Holds the tree's training matrix plus a presorted column order (CART)
    or pairwise squared distances (RBF), indexed by position in ``X``.
    """

    X: NDArray[np.float64]
    order: NDArray[np.int64] | None = None
    sqdist: NDArray[np.float64] | None = None
    _cache: dict = field(default_factory=dict)

    @classmethod
    def build(cls, X: NDArray, kind: str) -> "CellContext":
        X = np.asarray(X, dtype=float)
        if kind == "cart":
            return cls(X, order=presort(X))
        if kind == "rbf":
            return cls(X, sqdist=squared_distances(X, X))
        return cls(X)

    def cell_order(self, rows: NDArray) -> NDArray[np.int64]:
        """Presorted order restricted to ``rows`` and re-indexed to them."""
        member = np.zeros(self.X.shape[0], dtype=bool)
        member[rows] = True
        if np.unique(rows).size != rows.size:
            return presort(self.X[rows])
        remap = np.full(self.X.shape[0], -1, dtype=np.int64)
        remap[rows] = np.arange(rows.size)
        d = self.X.shape[1]
        sub = self.order.T[member[self.order.T]].reshape(d, rows.size).T
        return remap[sub]


def train_leafrank(
    X: ArrayLike,
    y: ArrayLike,
    omega: float,
    kind: str,
    params: Mapping[str, float],
    min_split: int = 30,
    context: CellContext | None = None,
    rows: NDArray | None = None,
) -> Rule:
    """Fit one cost-sensitive split rule.

    With ``context`` and ``rows`` given, ``X`` is ignored and the cell is
    ``context.X[rows]``; cached sort orders / distances are reused.
    """
    y = np.asarray(y)
    if context is not None and rows is not None:
        Xc = context.X[rows]
    else:
        Xc = np.asarray(X, dtype=float)
        context, rows = None, None
    if not np.any(y == 1) or not np.any(y == -1):
        raise ValueError("LeafRank needs both classes in the cell")
    if omega <= 0.0:
        return ConstantRule(True)
    if omega >= 1.0:
        return ConstantRule(False)
    w = class_weights(y, omega)
    if kind == "cart":
        order = context.cell_order(rows) if context is not None and context.order is not None else None
        return fit_cart(Xc, y, w, int(params["max_depth"]), min_split=min_split, order=order)
    if kind == "l1":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            svm = LinearSVC(penalty="l1", loss="squared_hinge", dual=False, C=float(params["C"]), max_iter=2000)
            svm.fit(Xc, y, sample_weight=w)
        return LinearRule(svm.coef_.ravel().copy(), float(svm.intercept_[0]))
    if kind == "rbf":
        gamma = float(params["gamma"]) if "gamma" in params else width_to_gamma(float(params["width"]))
        if context is not None and context.sqdist is not None:
            d2 = context.sqdist[np.ix_(rows, rows)]
        else:
            d2 = squared_distances(Xc, Xc)
        svm = SVC(kernel="precomputed", C=float(params["C"]))
        svm.fit(np.exp(-gamma * d2), y, sample_weight=w)
        sv = svm.support_
        return KernelRule(Xc[sv].copy(), svm.dual_coef_.ravel().copy(), float(svm.intercept_[0]), gamma)
    raise ValueError(f"unknown LeafRank {kind!r}")


def select_leafrank_params(
    X: ArrayLike, y: ArrayLike, spec: LeafRankSpec, seed: int
) -> dict:
    """Grid entry with the lowest mean held-out split cost.

    Uses stratified ``spec.cv_folds``-fold CV with ``omega`` set to the
    positive rate of the full set; ties go to the earlier grid entry.
    """
    if len(spec.grid) == 1:
        return dict(spec.grid[0])
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    omega = float(np.mean(y == 1))
    folds = stratified_folds(y, spec.cv_folds, seed)
    ctx = CellContext.build(X, spec.kind)
    costs = np.zeros(len(spec.grid))
    for f in range(spec.cv_folds):
        tr = np.flatnonzero(folds != f)
        va = np.flatnonzero(folds == f)
        for g, params in enumerate(spec.grid):
            rule = train_leafrank(None, y[tr], omega, spec.kind, params, spec.min_split, ctx, tr)
            costs[g] += split_cost(y[va], rule.goes_left(X[va]), omega)
    return dict(spec.grid[int(np.argmin(costs))])
