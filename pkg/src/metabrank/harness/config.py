"""Experiment configuration, default grids and ``key = value`` config files."""

from __future__ import annotations

import configparser
import dataclasses
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from ..data import CLASSES, HORMONES
from ..treerank.leafrank import CART_DEPTHS, RBF_WIDTH_GRID, SVM_C_GRID

FEATURE_SETS = ("raw", "pca", "haar", "db4", "db8")
LEARNERS = ("CART-TRF", "L1-TRF", "RBF-TRF", "RB", "RSVM")
EXTRA_LEARNERS = ("TR",)  # single TreeRank tree, not in the default grid
PROTOCOLS = ("fold", "global")
FRACTIONS = (0.5, 0.75, 1.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines an experiment run.

    ``transform_protocol="fold"`` fits PCA and standardization on each outer
    training fold; ``"global"`` fits them once on every row of the cell.
    ``shuffle_test_labels`` permutes outer test labels after the split
    (a leakage canary: AUCs should then hover around 0.5).
    """

    feature_sets: tuple[str, ...] = FEATURE_SETS
    learners: tuple[str, ...] = LEARNERS
    hormones: tuple[str, ...] = HORMONES
    classes: tuple[str, ...] = CLASSES
    seed: int = 0
    outer_folds: int = 3
    inner_folds: int = 5
    transform_protocol: str = "fold"
    shuffle_test_labels: bool = False
    pca_components: int = 100
    wavelet_levels: int = 10
    # Ranking Forests
    n_trees: int = 20
    forest_depth: int = 10
    forest_min_split: int = 50
    bootstrap_fractions: tuple[float, ...] = FRACTIONS
    feature_fractions: tuple[float, ...] = FRACTIONS
    leafrank_cv_folds: int = 3
    cart_depths: tuple[int, ...] = CART_DEPTHS
    cart_min_split: int = 30
    svm_c_grid: tuple[float, ...] = SVM_C_GRID
    rbf_width_grid: tuple[float, ...] = RBF_WIDTH_GRID
    # RankBoost
    rb_rounds: tuple[int, ...] = (10, 50, 100)
    rb_candidates: tuple[int, ...] = (5, 10, 20)
    # Ranking SVM (RBF kernel)
    rsvm_c_grid: tuple[float, ...] = (1.0, 2.0, 4.0)
    rsvm_gamma_grid: tuple[float, ...] = (0.125, 0.25, 0.5)
    rsvm_epochs: int = 200

    def __post_init__(self) -> None:
        for name, allowed in (("feature_sets", FEATURE_SETS), ("learners", LEARNERS + EXTRA_LEARNERS),
                              ("hormones", HORMONES), ("classes", CLASSES)):
            bad = [v for v in getattr(self, name) if v not in allowed]
            if bad:
                raise ValueError(f"unknown {name} {bad}; allowed: {', '.join(allowed)}")
        if self.transform_protocol not in PROTOCOLS:
            raise ValueError(f"transform_protocol must be one of {PROTOCOLS}")
        if self.outer_folds < 2 or self.inner_folds < 2:
            raise ValueError("need at least two outer and two inner folds")
        for name in ("bootstrap_fractions", "feature_fractions"):
            if not all(0.0 < f <= 1.0 for f in getattr(self, name)):
                raise ValueError(f"{name} must lie in (0, 1]")
        for f in dataclasses.fields(self):
            if isinstance(getattr(self, f.name), tuple) and not getattr(self, f.name):
                raise ValueError(f"{f.name} is empty")

    def replace(self, **changes: Any) -> "ExperimentConfig":
        return dataclasses.replace(self, **{k: _coerce(self, k, v) for k, v in changes.items()})

    def snapshot(self) -> dict:
        """Plain-data view of the config, including the expanded learner grids."""
        d = {f.name: _plain(getattr(self, f.name)) for f in dataclasses.fields(self)}
        d["grids"] = {name: [dict(p) for p in learner_grid(self, name)] for name in LEARNERS + EXTRA_LEARNERS}
        return d

    @classmethod
    def from_snapshot(cls, d: Mapping) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        return cls().replace(**{k: v for k, v in d.items() if k in names})


def _plain(v: Any) -> Any:
    return list(v) if isinstance(v, tuple) else v


def _field_type(name: str) -> str:
    for f in dataclasses.fields(ExperimentConfig):
        if f.name == name:
            return str(f.type)
    raise KeyError(name)


def _coerce(cfg: ExperimentConfig, name: str, value: Any) -> Any:
    """Convert a value (possibly a string from a config file) to the field's type."""
    try:
        ftype = _field_type(name)
    except KeyError:
        raise ValueError(f"unknown config key {name!r}") from None
    if ftype.startswith("tuple"):
        inner = ftype[len("tuple["):].split(",")[0].strip()
        items = value.replace(",", " ").split() if isinstance(value, str) else list(value)
        return tuple(_scalar(inner, v, name) for v in items)
    return _scalar(ftype, value, name)


def _scalar(ftype: str, value: Any, name: str) -> Any:
    try:
        if ftype == "bool":
            if isinstance(value, str):
                low = value.strip().lower()
                if low not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                return low in ("true", "1", "yes")
            return bool(value)
        if ftype == "int":
            return int(value)
        if ftype == "float":
            return _parse_float(value)
        return str(value).strip()
    except ValueError:
        raise ValueError(f"config key {name!r}: cannot read {value!r} as {ftype}") from None


def _parse_float(value: Any) -> float:
    """Floats, also written as ``2^-3`` or ``1/8``."""
    if isinstance(value, str):
        s = value.strip()
        if "^" in s:
            base, exp = s.split("^", 1)
            return float(base) ** float(exp)
        if "/" in s:
            num, den = s.split("/", 1)
            return float(num) / float(den)
        return float(s)
    return float(value)


def load_config(path: str | Path | None, **overrides: Any) -> ExperimentConfig:
    """Read a ``key = value`` file (``#`` comments, list values separated by
    commas or spaces) on top of the defaults."""
    cfg = ExperimentConfig()
    values: dict[str, str] = {}
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",), delimiters=("=",))
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ValueError(f"cannot read config {path}: {exc}") from None
        try:
            parser.read_string("[config]\n" + text)
        except configparser.Error as exc:
            raise ValueError(f"malformed config {path}: {exc}") from None
        values = dict(parser["config"])
    values.update({k: v for k, v in overrides.items() if v is not None})
    return cfg.replace(**values)


def learner_grid(cfg: ExperimentConfig, learner: str) -> list[dict]:
    """Hyperparameter combinations searched by the outer model selection."""
    if learner.endswith("-TRF"):
        return [{"bootstrap_fraction": b, "feature_fraction": f}
                for b, f in itertools.product(cfg.bootstrap_fractions, cfg.feature_fractions)]
    if learner == "TR":
        return [{}]
    if learner == "RB":
        return [{"T": t, "candidates": c} for t, c in itertools.product(cfg.rb_rounds, cfg.rb_candidates)]
    if learner == "RSVM":
        return [{"C": c, "gamma": g} for c, g in itertools.product(cfg.rsvm_c_grid, cfg.rsvm_gamma_grid)]
    raise ValueError(f"unknown learner {learner!r}")


def config_field_names() -> list[str]:
    return [f.name for f in dataclasses.fields(ExperimentConfig)]


__all__ = [
    "EXTRA_LEARNERS",
    "ExperimentConfig",
    "FEATURE_SETS",
    "LEARNERS",
    "config_field_names",
    "learner_grid",
    "load_config",
]
