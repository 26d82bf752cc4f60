"""Nested cross-validated evaluation over the experiment grid."""

from __future__ import annotations

import json
import logging
import math
import time
import traceback
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

from ..core import LabeledDataset, RocCurve, auc_pairwise, roc_curve
from ..data import SpectraPanel, bin_labels, impute_age
from ..folds import CvPlan, derive_seed, stratified_folds
from .config import ExperimentConfig, learner_grid
from .learners import fit_grid, fit_learner, prepare
from .pipeline import fit_pipeline, pipeline_dataset

logger = logging.getLogger(__name__)


def model_select(
    train: LabeledDataset,
    learner: str,
    grid: Sequence[Mapping[str, Any]],
    plan: CvPlan,
    cfg: ExperimentConfig | None = None,
    shared: Mapping[str, Any] | None = None,
) -> tuple[dict, list[float]]:
    """Grid entry with the highest mean inner-validation AUC.

    Every entry sees the same ``plan.inner_folds`` stratified folds and
    seeds.  Ties go to the entry listed first.  A failed fit removes that
    entry from the running; if every entry fails, ``RuntimeError``.
    Returns the chosen entry and the mean AUC of every entry (NaN when it
    failed).
    """
    if not grid:
        raise ValueError("hyperparameter grid is empty")
    cfg = cfg or ExperimentConfig()
    if len(grid) == 1:
        return dict(grid[0]), [math.nan]
    folds = stratified_folds(train.labels, plan.inner_folds, derive_seed(plan.seed, "inner-folds"))
    scores = np.zeros((plan.inner_folds, len(grid)))
    errors: list[str] = []
    for j in range(plan.inner_folds):
        tr = train.subset(np.flatnonzero(folds != j))
        va = train.subset(np.flatnonzero(folds == j))
        seed = derive_seed(plan.seed, "inner", j)
        try:
            models = fit_grid(learner, tr, grid, cfg, seed, shared)
        except Exception as exc:  # noqa: BLE001 - fall back to per-entry fits
            errors.append(repr(exc))
            models = []
            for p in grid:
                try:
                    models.append(fit_learner(learner, tr, p, cfg, seed, shared))
                except Exception as inner:  # noqa: BLE001
                    errors.append(repr(inner))
                    models.append(None)
        for g, m in enumerate(models):
            scores[j, g] = math.nan if m is None else auc_pairwise(m.score(va.features), va.labels)
    means = scores.mean(axis=0)
    if np.all(np.isnan(means)):
        raise RuntimeError(f"{learner}: every grid entry failed: {errors[:3]}")
    best = int(np.argmax(np.where(np.isnan(means), -np.inf, means)))
    return dict(grid[best]), [float(m) for m in means]


@dataclass
class FoldResult:
    fold: int
    auc: float
    params: dict
    leafrank_params: dict
    inner_aucs: list[float]
    n_train: int
    n_test: int
    roc: RocCurve

    def to_dict(self) -> dict:
        thresholds = [None if math.isinf(t) else float(t) for t in self.roc.thresholds]
        return {
            "fold": self.fold, "auc": self.auc, "params": self.params,
            "leafrank_params": self.leafrank_params,
            "inner_aucs": [None if math.isnan(a) else a for a in self.inner_aucs],
            "n_train": self.n_train, "n_test": self.n_test,
            "roc": {"fpr": self.roc.fpr.tolist(), "tpr": self.roc.tpr.tolist(), "thresholds": thresholds},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FoldResult":
        r = d["roc"]
        thr = np.array([math.inf if t is None else t for t in r["thresholds"]], dtype=float)
        return cls(int(d["fold"]), float(d["auc"]), dict(d["params"]), dict(d["leafrank_params"]),
                   [math.nan if a is None else float(a) for a in d["inner_aucs"]],
                   int(d["n_train"]), int(d["n_test"]),
                   RocCurve(np.asarray(r["fpr"], dtype=float), np.asarray(r["tpr"], dtype=float), thr))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FoldResult) and self.to_dict() == other.to_dict()


@dataclass
class CellResult:
    feature_set: str
    learner: str
    hormone: str
    target_class: str
    n_examples: int = 0
    n_positive: int = 0
    n_features: int = 0
    folds: list[FoldResult] = field(default_factory=list)
    error: str | None = None
    wall_time: float = field(default=0.0, compare=False)

    @property
    def key(self) -> tuple[str, str, str, str]:
        return (self.feature_set, self.learner, self.hormone, self.target_class)

    @property
    def cell_id(self) -> str:
        return "_".join(self.key)

    @property
    def mean_auc(self) -> float:
        return float(np.mean([f.auc for f in self.folds])) if self.folds else math.nan

    @property
    def std_auc(self) -> float:
        """Sample standard deviation of the outer-fold AUCs."""
        if len(self.folds) < 2:
            return 0.0 if self.folds else math.nan
        return float(np.std([f.auc for f in self.folds], ddof=1))

    def to_dict(self) -> dict:
        return {
            "feature_set": self.feature_set, "learner": self.learner, "hormone": self.hormone,
            "target_class": self.target_class, "n_examples": self.n_examples,
            "n_positive": self.n_positive, "n_features": self.n_features,
            "mean_auc": None if math.isnan(self.mean_auc) else self.mean_auc,
            "std_auc": None if math.isnan(self.std_auc) else self.std_auc,
            "error": self.error, "folds": [f.to_dict() for f in self.folds],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CellResult":
        return cls(d["feature_set"], d["learner"], d["hormone"], d["target_class"], int(d["n_examples"]),
                   int(d["n_positive"]), int(d["n_features"]), [FoldResult.from_dict(f) for f in d["folds"]],
                   d.get("error"))


@dataclass
class ExperimentReport:
    config: dict
    cells: list[CellResult] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"config": self.config, "cells": [c.to_dict() for c in self.cells]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, allow_nan=False)

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentReport":
        return cls(dict(d["config"]), [CellResult.from_dict(c) for c in d["cells"]])

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        return cls.from_dict(json.loads(text))


def _fold_task(panel: SpectraPanel, cfg: ExperimentConfig, key: tuple[str, str, str, str], fold: int
               ) -> tuple[FoldResult | None, str | None, float]:
    start = time.perf_counter()
    try:
        with threadpool_limits(1):
            result = _evaluate_fold(panel, cfg, key, fold)
        return result, None, time.perf_counter() - start
    except Exception as exc:  # noqa: BLE001 - recorded per cell
        logger.warning("cell %s fold %d failed: %s", "_".join(key), fold, exc)
        logger.debug(traceback.format_exc())
        return None, f"fold {fold}: {type(exc).__name__}: {exc}", time.perf_counter() - start


def _problem(panel: SpectraPanel, hormone: str, target: str, cfg: ExperimentConfig):
    ds = bin_labels(panel, hormone, target)
    spectra, age = ds.features[:, :-1], ds.features[:, -1]
    folds = stratified_folds(ds.labels, cfg.outer_folds, derive_seed(cfg.seed, "outer", hormone, target))
    return spectra, age, ds.labels, folds


def _evaluate_fold(panel: SpectraPanel, cfg: ExperimentConfig, key: tuple[str, str, str, str], fold: int
                   ) -> FoldResult:
    feature_set, learner, hormone, target = key
    spectra, age, y, folds = _problem(panel, hormone, target, cfg)
    tr, te = np.flatnonzero(folds != fold), np.flatnonzero(folds == fold)
    fit_rows = tr if cfg.transform_protocol == "fold" else np.arange(y.size)
    pipe = fit_pipeline(feature_set, spectra[fit_rows], age[fit_rows], cfg.pca_components, cfg.wavelet_levels)
    train = pipeline_dataset(pipe, spectra[tr], age[tr], y[tr])
    test_X = pipe.transform(spectra[te], age[te])
    test_y = y[te]
    seed = derive_seed(cfg.seed, *key, fold)
    if cfg.shuffle_test_labels:
        test_y = np.random.default_rng(derive_seed(seed, "canary")).permutation(test_y)

    shared = prepare(learner, train, cfg, seed)
    grid = learner_grid(cfg, learner)
    params, inner = model_select(train, learner, grid, CvPlan(cfg.outer_folds, cfg.inner_folds, seed), cfg, shared)
    model = fit_learner(learner, train, params, cfg, derive_seed(seed, "final"), shared)
    scores = np.asarray(model.score(test_X))
    return FoldResult(fold, auc_pairwise(scores, test_y), params, dict(shared.get("leafrank", {})), inner,
                      int(tr.size), int(te.size), roc_curve(scores, test_y))


def grid_cells(cfg: ExperimentConfig) -> list[tuple[str, str, str, str]]:
    """Cell keys in report order: hormone, class, feature set, learner."""
    return [(fs, lr, h, c) for h in cfg.hormones for c in cfg.classes
            for fs in cfg.feature_sets for lr in cfg.learners]


def run_experiment(panel: SpectraPanel, cfg: ExperimentConfig | None = None, n_jobs: int = 1) -> ExperimentReport:
    """Evaluate every grid cell by nested stratified cross validation.

    Outer folds are shared by all cells of one (hormone, class) problem.
    Each (cell, fold) task draws its randomness from a stream keyed by the
    seed, the cell and the fold, and BLAS runs single-threaded inside
    tasks, so the report does not depend on ``n_jobs``.  Failures are
    recorded on the cell.
    """
    cfg = cfg or ExperimentConfig()
    panel = impute_age(panel)
    keys = grid_cells(cfg)
    cells: list[CellResult] = []
    for key in keys:
        cell = CellResult(*key)
        try:
            spectra, age, y, _ = _problem(panel, key[2], key[3], cfg)
            cell.n_examples, cell.n_positive = int(y.size), int(np.sum(y == 1))
            cell.n_features = _n_features(key[0], spectra.shape, cfg)
        except Exception as exc:  # noqa: BLE001
            cell.error = f"{type(exc).__name__}: {exc}"
        cells.append(cell)

    tasks = [(i, f) for i, c in enumerate(cells) if c.error is None for f in range(cfg.outer_folds)]
    if n_jobs == 1:
        outputs = [_fold_task(panel, cfg, cells[i].key, f) for i, f in tasks]
    else:
        outputs = Parallel(n_jobs=n_jobs)(delayed(_fold_task)(panel, cfg, cells[i].key, f) for i, f in tasks)
    for (i, _), (result, error, elapsed) in zip(tasks, outputs):
        cell = cells[i]
        cell.wall_time += elapsed
        if result is not None:
            cell.folds.append(result)
        else:
            cell.error = error if cell.error is None else f"{cell.error}; {error}"
    return ExperimentReport(cfg.snapshot(), cells)


def _n_features(feature_set: str, shape: tuple[int, int], cfg: ExperimentConfig) -> int:
    n, d = shape
    if feature_set == "raw":
        return d + 1
    if feature_set == "pca":
        return min(cfg.pca_components, n, d) + 1
    return (1 << (d - 1).bit_length()) + 1
