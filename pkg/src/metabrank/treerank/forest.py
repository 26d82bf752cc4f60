"""Ranking Forests: bagged, feature-randomized TreeRank ensembles."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from joblib import Parallel, delayed
from numpy.typing import ArrayLike, NDArray

from ..core import LabeledDataset, as_batch
from ..folds import derive_seed
from .leafrank import LeafRankSpec, select_leafrank_params
from .tree import RankingTree, train_tree

MAX_BOOTSTRAP_RETRIES = 100


@dataclass
class RankingForest:
    trees: list[RankingTree]
    bootstrap_fraction: float
    feature_fraction: float
    seed: int
    feature_names: tuple[str, ...] = ()
    leafrank_kind: str = "cart"
    leafrank_params: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return self.trees[0].n_features

    def score(self, X: ArrayLike) -> float | NDArray[np.float64]:
        Xb, single = as_batch(X, self.n_features)
        s = np.mean([tree.score(Xb) for tree in self.trees], axis=0)
        return float(s[0]) if single else s

    def describe(self) -> str:
        return (f"RankingForest(B={len(self.trees)}, D={self.trees[0].depth_limit}, "
                f"bootstrap={self.bootstrap_fraction}, features={self.feature_fraction}, "
                f"leafrank={self.leafrank_kind}, params={self.leafrank_params})")

    def to_dict(self) -> dict:
        return {
            "type": "ranking_forest",
            "bootstrap_fraction": self.bootstrap_fraction,
            "feature_fraction": self.feature_fraction,
            "seed": self.seed,
            "feature_names": list(self.feature_names),
            "leafrank_kind": self.leafrank_kind,
            "leafrank_params": dict(self.leafrank_params),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RankingForest":
        return cls(
            [RankingTree.from_dict(t) for t in d["trees"]],
            float(d["bootstrap_fraction"]),
            float(d["feature_fraction"]),
            int(d["seed"]),
            tuple(d.get("feature_names", ())),
            d.get("leafrank_kind", "cart"),
            dict(d.get("leafrank_params", {})),
        )


def score_forest(forest: RankingForest, example: ArrayLike) -> float | NDArray[np.float64]:
    """Mean of the tree scores."""
    return forest.score(example)


def _draw(n: int, d: int, y: NDArray, bootstrap_fraction: float, feature_fraction: float,
          rng: np.random.Generator, bootstrap: bool) -> tuple[NDArray, NDArray]:
    n_boot = max(2, int(round(bootstrap_fraction * n)))
    for _ in range(MAX_BOOTSTRAP_RETRIES):
        rows = rng.integers(0, n, size=n_boot) if bootstrap else np.arange(n)
        if np.any(y[rows] == 1) and np.any(y[rows] == -1):
            break
    else:
        raise ValueError(f"no two-class bootstrap sample in {MAX_BOOTSTRAP_RETRIES} draws")
    n_feat = max(1, int(round(feature_fraction * d)))
    cols = np.sort(rng.choice(d, size=n_feat, replace=False)) if n_feat < d else np.arange(d)
    return rows, cols


def _grow(train: LabeledDataset, b: int, seed: int, bootstrap_fraction: float, feature_fraction: float,
          depth: int, min_split: int, leafrank: LeafRankSpec, bootstrap: bool, min_gain: float | None) -> RankingTree:
    rng = np.random.default_rng(derive_seed(seed, "tree", b))
    rows, cols = _draw(train.n_examples, train.n_features, train.labels,
                       bootstrap_fraction, feature_fraction, rng, bootstrap)
    return train_tree(train.subset(rows), depth, min_split, leafrank, cols,
                      seed=derive_seed(seed, "leafrank", b), min_gain=min_gain)


def train_forest(
    train: LabeledDataset,
    n_trees: int = 20,
    bootstrap_fraction: float = 1.0,
    feature_fraction: float = 1.0,
    depth: int = 10,
    min_split: int = 50,
    leafrank: LeafRankSpec | None = None,
    seed: int = 0,
    bootstrap: bool = True,
    min_gain: float | None = 0.0,
    n_jobs: int = 1,
) -> RankingForest:
    """Train ``n_trees`` ranking trees on bootstrap samples and feature subsets.

    Tree ``b`` draws its sample and features from an RNG keyed on
    ``(seed, b)``, so the forest does not depend on ``n_jobs``.  When the
    LeafRank spec carries a grid, hyperparameters are chosen once by
    cross validation on the full training set and shared by all trees.
    ``bootstrap=False`` trains every tree on the full sample.
    """
    train.require_both_classes()
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    for name, frac in (("bootstrap_fraction", bootstrap_fraction), ("feature_fraction", feature_fraction)):
        if not 0.0 < frac <= 1.0:
            raise ValueError(f"{name} must lie in (0, 1]")
    leafrank = leafrank or LeafRankSpec("cart", ({"max_depth": 2},))
    params = select_leafrank_params(train.features, train.labels, leafrank, derive_seed(seed, "leafrank-cv"))
    fixed = leafrank.with_params(params)
    args = (seed, bootstrap_fraction, feature_fraction, depth, min_split, fixed, bootstrap, min_gain)
    if n_jobs == 1:
        trees = [_grow(train, b, *args) for b in range(n_trees)]
    else:
        trees = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(_grow)(train, b, *args) for b in range(n_trees))
    return RankingForest(list(trees), bootstrap_fraction, feature_fraction, seed,
                         train.feature_names, leafrank.kind, params)


@dataclass(frozen=True)
class FeatureImportance:
    weights: NDArray[np.float64]
    feature_names: tuple[str, ...]

    def ranked(self) -> list[tuple[int, str, float]]:
        """(index, name, weight) sorted by decreasing weight, index breaking ties."""
        order = np.lexsort((np.arange(self.weights.size), -self.weights))
        return [(int(i), self.feature_names[i], float(self.weights[i])) for i in order]

    def top(self, k: int) -> list[int]:
        return [i for i, _, _ in self.ranked()[:k]]


def importance_vector(forest: RankingForest) -> NDArray[np.float64]:
    """Unnormalized ``sum_m dAUC(m)**2 * |w_m|`` over all trees, in full feature space."""
    total = np.zeros(forest.n_features)
    for tree in forest.trees:
        for node in tree.internal_nodes():
            w = node.rule.weight_vector
            if w is None:
                raise ValueError(f"feature importance needs a linear LeafRank, tree uses {tree.leafrank_kind!r}")
            total[tree.feature_subset] += node.delta_auc**2 * np.abs(w)
    return total


def feature_importance(forest: RankingForest, feature_names: Sequence[str] | None = None) -> FeatureImportance:
    """Unit-norm importance weights from a linear-LeafRank forest."""
    if forest.leafrank_kind != "l1":
        raise ValueError(f"feature importance needs a linear LeafRank, forest uses {forest.leafrank_kind!r}")
    w = importance_vector(forest)
    norm = np.linalg.norm(w)
    if norm == 0:
        raise ValueError("all importance weights are zero; nothing to normalize")
    names = tuple(feature_names) if feature_names is not None else forest.feature_names
    if len(names) != w.size:
        names = tuple(f"f{i}" for i in range(w.size))
    return FeatureImportance(w / norm, names)
