"""Learner registry: how each grid learner is fitted from hyperparameters."""

from __future__ import annotations

from typing import Any, Mapping, Sequence

from ..core import LabeledDataset, Scorer
from ..folds import derive_seed
from ..rankboost import BoostedRanker, fit_rankboost
from ..ranksvm import RankSvmModel, fit_ranksvm
from ..treerank import RankingForest, train_forest
from ..treerank.leafrank import LeafRankSpec, select_leafrank_params
from .config import ExperimentConfig

FOREST_LEAFRANK = {"CART-TRF": "cart", "L1-TRF": "l1", "RBF-TRF": "rbf", "TR": "cart"}


def leafrank_spec(cfg: ExperimentConfig, kind: str) -> LeafRankSpec:
    if kind == "cart":
        grid = [{"max_depth": d} for d in cfg.cart_depths]
    elif kind == "l1":
        grid = [{"C": c} for c in cfg.svm_c_grid]
    else:
        grid = [{"C": c, "width": w} for c in cfg.svm_c_grid for w in cfg.rbf_width_grid]
    return LeafRankSpec(kind, tuple(grid), cfg.leafrank_cv_folds, cfg.cart_min_split)


def prepare(learner: str, train: LabeledDataset, cfg: ExperimentConfig, seed: int) -> dict:
    """State shared by every fit within one outer training fold.

    For forests this is the LeafRank hyperparameter choice, made once by
    cross validation on the outer training fold.
    """
    kind = FOREST_LEAFRANK.get(learner)
    if kind is None:
        return {}
    spec = leafrank_spec(cfg, kind)
    return {"leafrank": select_leafrank_params(train.features, train.labels, spec, derive_seed(seed, "leafrank-cv"))}


def fit_learner(learner: str, train: LabeledDataset, params: Mapping[str, Any], cfg: ExperimentConfig,
                seed: int, shared: Mapping[str, Any] | None = None) -> Scorer:
    shared = shared if shared is not None else prepare(learner, train, cfg, seed)
    if learner in FOREST_LEAFRANK:
        kind = FOREST_LEAFRANK[learner]
        spec = leafrank_spec(cfg, kind).with_params(shared["leafrank"])
        if learner == "TR":
            return train_forest(train, 1, 1.0, 1.0, cfg.forest_depth, cfg.forest_min_split, spec,
                                seed=seed, bootstrap=False)
        return train_forest(train, cfg.n_trees, float(params["bootstrap_fraction"]), float(params["feature_fraction"]),
                            cfg.forest_depth, cfg.forest_min_split, spec, seed=seed)
    if learner == "RB":
        return fit_rankboost(train, int(params["T"]), int(params["candidates"]), seed=seed)
    if learner == "RSVM":
        return fit_ranksvm(train, C=float(params["C"]), kernel="rbf", gamma=float(params["gamma"]),
                           epochs=cfg.rsvm_epochs, seed=seed)
    raise ValueError(f"unknown learner {learner!r}")


def fit_grid(learner: str, train: LabeledDataset, grid: Sequence[Mapping[str, Any]], cfg: ExperimentConfig,
             seed: int, shared: Mapping[str, Any] | None = None) -> list[Scorer]:
    """One fitted scorer per grid entry, all with the same seed.

    RankBoost runs once per candidate count with the largest ``T`` and is
    truncated for smaller ``T``; the first ``T`` rounds do not depend on
    the total number of rounds, so this equals separate fits.
    """
    if learner != "RB":
        return [fit_learner(learner, train, p, cfg, seed, shared) for p in grid]
    longest: dict[int, BoostedRanker] = {}
    for p in grid:
        c = int(p["candidates"])
        T = max(int(q["T"]) for q in grid if int(q["candidates"]) == c)
        if c not in longest:
            longest[c] = fit_rankboost(train, T, c, seed=seed)
    return [longest[int(p["candidates"])].truncated(int(p["T"])) for p in grid]


def model_from_dict(d: Mapping[str, Any]) -> Scorer:
    kind = d.get("type")
    if kind == "ranking_forest":
        return RankingForest.from_dict(d)
    if kind == "rankboost":
        return BoostedRanker.from_dict(d)
    if kind == "ranksvm":
        return RankSvmModel.from_dict(d)
    raise ValueError(f"unknown model type {kind!r}")
