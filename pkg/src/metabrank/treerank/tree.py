"""TreeRank ranking trees.

Cells are addressed ``(d, k)``: the root is ``(0, 0)`` and cell ``(d, k)``
splits into the LeafRank's positive region ``(d+1, 2k)`` (left) and the
remainder ``(d+1, 2k+1)`` (right).  A terminal cell scores
``2**D * (1 - k / 2**d)`` so scores decrease from left to right.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..core import LabeledDataset, as_batch, auc_pairwise
from .leafrank import CellContext, LeafRankSpec, Rule, rule_from_dict, select_leafrank_params, train_leafrank

Address = tuple[int, int]


@dataclass
class TreeNode:
    depth: int
    index: int
    n_positive: int
    n_negative: int
    omega: float | None = None
    rule: Rule | None = None
    delta_auc: float | None = None

    @property
    def address(self) -> Address:
        return (self.depth, self.index)

    @property
    def is_leaf(self) -> bool:
        return self.rule is None

    def to_dict(self) -> dict:
        d = {"depth": self.depth, "index": self.index,
             "n_positive": self.n_positive, "n_negative": self.n_negative}
        if self.rule is not None:
            d.update(omega=self.omega, delta_auc=self.delta_auc, rule=self.rule.to_dict())
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "TreeNode":
        rule = rule_from_dict(d["rule"]) if "rule" in d else None
        return cls(int(d["depth"]), int(d["index"]), int(d["n_positive"]), int(d["n_negative"]),
                   d.get("omega"), rule, d.get("delta_auc"))


def leaf_score(depth_limit: int, d: int, k: int) -> float:
    """``2**D * (1 - k / 2**d)``."""
    return float(2**depth_limit * (1.0 - k / 2**d))


@dataclass
class RankingTree:
    """A trained ranking tree over a subset of the input features.

    ``feature_subset`` maps the tree's local columns to indices of the full
    feature vector of dimension ``n_features``.
    """

    depth_limit: int
    n_features: int
    feature_subset: NDArray[np.int64]
    nodes: dict[Address, TreeNode] = field(default_factory=dict)
    leafrank_kind: str = "cart"
    leafrank_params: dict = field(default_factory=dict)

    @property
    def root(self) -> TreeNode:
        return self.nodes[(0, 0)]

    def children(self, address: Address) -> tuple[Address, Address]:
        d, k = address
        return (d + 1, 2 * k), (d + 1, 2 * k + 1)

    def internal_nodes(self) -> list[TreeNode]:
        return [n for n in self.nodes.values() if not n.is_leaf]

    def leaves(self) -> list[TreeNode]:
        return [n for n in self.nodes.values() if n.is_leaf]

    def route(self, X: ArrayLike) -> list[Address]:
        """Terminal cell address of every example (full feature vectors)."""
        Xb, _ = as_batch(X, self.n_features)
        local = Xb[:, self.feature_subset]
        out: list[Address | None] = [None] * Xb.shape[0]
        stack = [((0, 0), np.arange(Xb.shape[0]))]
        while stack:
            addr, rows = stack.pop()
            node = self.nodes[addr]
            if node.is_leaf:
                for r in rows:
                    out[r] = addr
                continue
            if rows.size == 0:
                continue
            left = node.rule.goes_left(local[rows])
            lc, rc = self.children(addr)
            stack.append((lc, rows[left]))
            stack.append((rc, rows[~left]))
        return out  # type: ignore[return-value]

    def score(self, X: ArrayLike) -> float | NDArray[np.float64]:
        Xb, single = as_batch(X, self.n_features)
        s = np.array([leaf_score(self.depth_limit, d, k) for d, k in self.route(Xb)])
        return float(s[0]) if single else s

    def describe(self) -> str:
        return (f"TreeRank(D={self.depth_limit}, leafrank={self.leafrank_kind}, "
                f"params={self.leafrank_params}, leaves={len(self.leaves())})")

    def to_dict(self) -> dict:
        return {
            "depth_limit": self.depth_limit,
            "n_features": self.n_features,
            "feature_subset": self.feature_subset.tolist(),
            "leafrank_kind": self.leafrank_kind,
            "leafrank_params": dict(self.leafrank_params),
            "nodes": [n.to_dict() for _, n in sorted(self.nodes.items())],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RankingTree":
        nodes = {}
        for nd in d["nodes"]:
            node = TreeNode.from_dict(nd)
            nodes[node.address] = node
        return cls(int(d["depth_limit"]), int(d["n_features"]),
                   np.asarray(d["feature_subset"], dtype=np.int64), nodes,
                   d.get("leafrank_kind", "cart"), dict(d.get("leafrank_params", {})))


def score_tree(tree: RankingTree, example: ArrayLike) -> float | NDArray[np.float64]:
    return tree.score(example)


def train_tree(
    train: LabeledDataset,
    depth: int = 10,
    min_split: int = 50,
    leafrank: LeafRankSpec | None = None,
    feature_subset: Sequence[int] | None = None,
    seed: int = 0,
    min_gain: float | None = 0.0,
) -> RankingTree:
    """Grow a ranking tree by recursive cost-sensitive splitting.

    A cell becomes terminal when it is pure, holds fewer than ``min_split``
    examples, sits at depth ``depth``, or its LeafRank sends every example
    to one side.  With ``min_gain`` set, a split whose local AUC gain is
    below it is also rejected (``None`` accepts every nondegenerate split).
    If ``leafrank`` has several grid entries they are selected once, on the
    root cell, by cross validation.
    """
    train.require_both_classes()
    if depth < 1:
        raise ValueError("depth must be >= 1")
    leafrank = leafrank or LeafRankSpec("cart", ({"max_depth": 2},))
    subset = np.arange(train.n_features) if feature_subset is None else np.asarray(feature_subset, dtype=np.int64)
    if subset.size == 0 or subset.min() < 0 or subset.max() >= train.n_features:
        raise ValueError("feature_subset must be nonempty and within range")
    X = train.features[:, subset]
    y = train.labels
    params = select_leafrank_params(X, y, leafrank, seed)
    ctx = CellContext.build(X, leafrank.kind)

    tree = RankingTree(depth, train.n_features, subset, {}, leafrank.kind, params)
    frontier = [((0, 0), np.arange(y.size))]
    while frontier:
        next_frontier = []
        for (d, k), rows in frontier:
            yc = y[rows]
            n_pos = int(np.sum(yc == 1))
            node = TreeNode(d, k, n_pos, int(yc.size - n_pos))
            tree.nodes[(d, k)] = node
            if d >= depth or rows.size < min_split or n_pos == 0 or n_pos == yc.size:
                continue
            omega = n_pos / yc.size
            rule = train_leafrank(None, yc, omega, leafrank.kind, params, leafrank.min_split, ctx, rows)
            left = rule.goes_left(X[rows])
            if left.all() or not left.any():
                continue
            gain = auc_pairwise(left.astype(float), yc) - 0.5
            if min_gain is not None and gain < min_gain:
                continue
            node.omega, node.rule, node.delta_auc = omega, rule, gain
            next_frontier.append(((d + 1, 2 * k), rows[left]))
            next_frontier.append(((d + 1, 2 * k + 1), rows[~left]))
        frontier = next_frontier
    return tree
