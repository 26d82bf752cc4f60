"""Spectra panels: CSV ingestion, hormone label binning, preprocessing and
a synthetic stand-in generator.

A panel CSV has the header ``id,age,testosterone,cortisol,igf1,v0001..v0950``;
empty cells are missing values.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .core import LabeledDataset

logger = logging.getLogger(__name__)

SPECTRUM_WIDTH = 950
HORMONES = ("testosterone", "cortisol", "igf1")
CLASSES = ("low", "normal", "high")
META_COLUMNS = ("id", "age") + HORMONES
SPECTRUM_COLUMNS = tuple(f"v{i:04d}" for i in range(1, SPECTRUM_WIDTH + 1))
AGE_FEATURE = "age"

# observed class frequencies per hormone (low, normal, high) in the reference cohort
REFERENCE_FREQUENCIES = {
    "testosterone": (78, 500, 57),
    "cortisol": (62, 303, 268),
    "igf1": (71, 472, 88),
}


class Hormone(str, Enum):
    TESTOSTERONE = "testosterone"
    CORTISOL = "cortisol"
    IGF1 = "igf1"


class ConcentrationClass(str, Enum):
    LOW = "low"
    NORMAL = "normal"
    HIGH = "high"


@dataclass(frozen=True)
class ConcentrationBins:
    """Class boundaries (ng/ml) for each hormone.

    ``edges[h] = (normal_start, high_start, high_end)``: low is
    ``[0, normal_start)``, normal is ``[normal_start, high_start)`` and high is
    the closed interval ``[high_start, high_end]``.
    """

    edges: Mapping[str, tuple[float, float, float]]

    def __post_init__(self) -> None:
        for hormone, (a, b, c) in self.edges.items():
            if not 0 < a < b < c:
                raise ValueError(f"{hormone}: bin edges must satisfy 0 < {a} < {b} < {c}")

    @classmethod
    def default(cls) -> "ConcentrationBins":
        return cls(
            {
                "testosterone": (3.0, 9.0, 13.0),
                "cortisol": (89.0, 255.0, 573.0),
                "igf1": (200.0, 441.0, 781.0),
            }
        )

    def range_of(self, hormone: str, cls_name: str) -> tuple[float, float]:
        a, b, c = self.edges[Hormone(hormone).value]
        return {"low": (0.0, a), "normal": (a, b), "high": (b, c)}[ConcentrationClass(cls_name).value]

    def classify(self, hormone: str, values: ArrayLike) -> NDArray[np.object_]:
        """Class name for each (non-missing) concentration."""
        a, b, c = self.edges[Hormone(hormone).value]
        v = np.asarray(values, dtype=float)
        if np.any(v < 0) or np.any(v > c):
            raise ValueError(f"{hormone} concentration outside [0, {c}]")
        out = np.full(v.shape, "normal", dtype=object)
        out[v < a] = "low"
        out[v >= b] = "high"
        return out


@dataclass(frozen=True)
class SpectraPanel:
    """Per-subject spectra, age and hormone concentrations (NaN = missing)."""

    subject_id: tuple[str, ...]
    spectra: NDArray[np.float64]
    age_years: NDArray[np.float64]
    concentrations: Mapping[str, NDArray[np.float64]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        X = np.asarray(self.spectra, dtype=float)
        n = len(self.subject_id)
        if X.shape != (n, SPECTRUM_WIDTH):
            raise ValueError(f"spectra must be ({n}, {SPECTRUM_WIDTH}), got {X.shape}")
        age = np.asarray(self.age_years, dtype=float)
        if age.shape != (n,):
            raise ValueError("age_years must have one entry per subject")
        conc = {}
        for h in HORMONES:
            v = np.asarray(self.concentrations.get(h, np.full(n, np.nan)), dtype=float)
            if v.shape != (n,):
                raise ValueError(f"{h} must have one entry per subject")
            if np.any(v[~np.isnan(v)] < 0):
                raise ValueError(f"negative {h} concentration")
            conc[h] = v
        object.__setattr__(self, "subject_id", tuple(str(s) for s in self.subject_id))
        object.__setattr__(self, "spectra", X)
        object.__setattr__(self, "age_years", age)
        object.__setattr__(self, "concentrations", conc)

    @property
    def n(self) -> int:
        return len(self.subject_id)

    def take(self, rows: ArrayLike) -> "SpectraPanel":
        rows = np.asarray(rows)
        return SpectraPanel(
            subject_id=tuple(np.asarray(self.subject_id, dtype=object)[rows]),
            spectra=self.spectra[rows],
            age_years=self.age_years[rows],
            concentrations={h: v[rows] for h, v in self.concentrations.items()},
        )


def _parse_cell(text: str, where: str) -> float:
    text = text.strip()
    if text == "":
        return np.nan
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"non-numeric value {text!r} at {where}") from None
    if not np.isfinite(value):
        raise ValueError(f"non-finite value {text!r} at {where}")
    return value


def load_panel(path: str | Path) -> SpectraPanel:
    """Read a panel CSV (see module docstring for the layout)."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ValueError(f"cannot read panel file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if tuple(header[:5]) != META_COLUMNS:
            raise ValueError(f"{path}: header must start with {','.join(META_COLUMNS)}")
        n_spec = len(header) - len(META_COLUMNS)
        if n_spec != SPECTRUM_WIDTH:
            raise ValueError(f"{path}: expected {SPECTRUM_WIDTH} spectrum columns, found {n_spec}")
        if tuple(header[5:]) != SPECTRUM_COLUMNS:
            raise ValueError(f"{path}: spectrum columns must be named v0001..v{SPECTRUM_WIDTH:04d}")
        ids, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            ids.append(row[0].strip())
            rows.append([_parse_cell(c, f"{path}:{lineno}:{header[j + 1]}") for j, c in enumerate(row[1:])])
    values = np.array(rows, dtype=float).reshape(len(rows), len(header) - 1)
    if np.any(np.isnan(values[:, 4:])):
        raise ValueError(f"{path}: missing spectrum values")
    return SpectraPanel(
        subject_id=tuple(ids),
        spectra=values[:, 4:],
        age_years=values[:, 0],
        concentrations={h: values[:, 1 + i] for i, h in enumerate(HORMONES)},
    )


def _fmt(v: float) -> str:
    return "" if np.isnan(v) else repr(float(v))


def write_panel(panel: SpectraPanel, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(META_COLUMNS + SPECTRUM_COLUMNS)
        for i, sid in enumerate(panel.subject_id):
            meta = [sid, _fmt(panel.age_years[i])] + [_fmt(panel.concentrations[h][i]) for h in HORMONES]
            writer.writerow(meta + [repr(float(v)) for v in panel.spectra[i]])


def impute_age(panel: SpectraPanel) -> SpectraPanel:
    """Replace missing ages by the mean of the observed ones."""
    age = panel.age_years
    present = ~np.isnan(age)
    if not present.any():
        raise ValueError("cannot impute age: every age is missing")
    if present.all():
        return panel
    return replace(panel, age_years=np.where(present, age, age[present].mean()))


def class_labels(
    panel: SpectraPanel,
    hormone: str,
    target_class: str,
    bins: ConcentrationBins | None = None,
) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
    """Rows with the hormone observed and their +1/-1 labels for ``target_class``."""
    bins = bins or ConcentrationBins.default()
    hormone = Hormone(hormone).value
    target_class = ConcentrationClass(target_class).value
    values = panel.concentrations[hormone]
    rows = np.flatnonzero(~np.isnan(values))
    if rows.size == 0:
        raise ValueError(f"every {hormone} value is missing")
    classes = bins.classify(hormone, values[rows])
    labels = np.where(classes == target_class, 1, -1).astype(np.int64)
    if np.all(labels == 1) or np.all(labels == -1):
        logger.warning("%s/%s labels are single-class", hormone, target_class)
    return rows, labels


def raw_feature_names() -> tuple[str, ...]:
    return SPECTRUM_COLUMNS + (AGE_FEATURE,)


def bin_labels(
    panel: SpectraPanel,
    hormone: str,
    target_class: str,
    bins: ConcentrationBins | None = None,
) -> LabeledDataset:
    """Raw-spectrum dataset for one bipartite problem; age is the last feature.

    Rows missing the hormone are dropped.  Missing ages must be imputed
    first (:func:`impute_age`).
    """
    rows, labels = class_labels(panel, hormone, target_class, bins)
    age = panel.age_years[rows]
    if np.any(np.isnan(age)):
        raise ValueError("missing ages; call impute_age first")
    X = np.column_stack([panel.spectra[rows], age])
    return LabeledDataset(X, labels, raw_feature_names())


@dataclass(frozen=True)
class Standardizer:
    """Per-feature centre and scale learnt on training data.

    Columns are centred and divided by the Euclidean norm of the centred
    column.  Constant columns keep divisor 1 and are flagged in ``constant``.
    """

    center: NDArray[np.float64]
    scale: NDArray[np.float64]
    constant: NDArray[np.bool_]

    def transform(self, X: ArrayLike) -> NDArray[np.float64]:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.center.size:
            raise ValueError(f"expected {self.center.size} features, got {X.shape[-1]}")
        return (X - self.center) / self.scale

    def apply(self, dataset: LabeledDataset) -> LabeledDataset:
        return LabeledDataset(self.transform(dataset.features), dataset.labels, dataset.feature_names)

    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "scale": self.scale.tolist(),
            "constant": self.constant.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Standardizer":
        return cls(
            np.asarray(d["center"], dtype=float),
            np.asarray(d["scale"], dtype=float),
            np.asarray(d["constant"], dtype=bool),
        )


def fit_standardizer(X: ArrayLike) -> Standardizer:
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise ValueError("standardization needs at least two examples")
    center = X.mean(axis=0)
    norms = np.sqrt(np.sum((X - center) ** 2, axis=0))
    constant = norms <= 1e-12 * np.maximum(1.0, np.abs(center)) * np.sqrt(X.shape[0])
    scale = np.where(constant, 1.0, norms)
    return Standardizer(center, scale, constant)


def standardize(dataset: LabeledDataset) -> tuple[LabeledDataset, Standardizer]:
    """Centre each feature and scale it to unit Euclidean norm."""
    record = fit_standardizer(dataset.features)
    return record.apply(dataset), record


def pad_pow2(spectrum: ArrayLike) -> NDArray[np.float64]:
    """Pad with border values up to the next power-of-two length.

    Half the padding replicates the first value in front, the rest (one more
    when the total is odd) replicates the last value at the back.
    """
    x = np.asarray(spectrum, dtype=float).ravel()
    d = x.size
    if d < 1:
        raise ValueError("cannot pad an empty spectrum")
    target = 1 << (d - 1).bit_length()
    extra = target - d
    front = extra // 2
    return np.concatenate([np.full(front, x[0]), x, np.full(extra - front, x[-1])])


def strip_padding(padded: ArrayLike, original_length: int) -> NDArray[np.float64]:
    """Recover the original values from :func:`pad_pow2` output."""
    x = np.asarray(padded, dtype=float)
    front = (x.shape[-1] - original_length) // 2
    return x[..., front : front + original_length]


@dataclass(frozen=True)
class SynthConfig:
    """Knobs of the synthetic spectra generator.

    ``water_band`` is the half-open column range zeroed to mimic water
    suppression.  ``signal_hormone`` is the hormone whose class the planted
    features encode; the other hormones are independent of the spectra.
    """

    n_metabolites: int = 40
    peaks_per_metabolite: tuple[int, int] = (1, 4)
    peak_width: tuple[float, float] = (1.5, 6.0)
    noise_sd: float = 0.02
    water_band: tuple[int, int] = (440, 470)
    signal_hormone: str = "cortisol"
    missing_age_rate: float = 0.03
    missing_hormone_rate: float = 0.02


def _allocate(n: int, freqs: Sequence[int]) -> NDArray[np.int64]:
    """Largest-remainder allocation of ``n`` items in proportion to ``freqs``."""
    f = np.asarray(freqs, dtype=float)
    quota = n * f / f.sum()
    counts = np.floor(quota).astype(np.int64)
    order = np.argsort(-(quota - counts), kind="stable")
    counts[order[: n - counts.sum()]] += 1
    return counts


def synthesize_panel(
    n: int,
    seed: int,
    planted_features: Iterable[int] = (),
    effect_size: float = 2.0,
    config: SynthConfig | None = None,
) -> SpectraPanel:
    """Synthetic stand-in for a serum NMR panel.

    Each spectrum is a smooth baseline plus Gaussian peaks from a fixed set
    of "metabolites" whose concentrations vary per subject, plus white
    noise; the water band is zeroed.  Hormone classes follow the reference
    frequencies.  For the signal hormone each planted column is shifted by
    ``effect_size`` times its standard deviation per class step (low -1,
    normal 0, high +1).  Output depends only on the arguments.
    """
    cfg = config or SynthConfig()
    if n < 10:
        raise ValueError("n must be >= 10")
    planted = np.array(sorted(set(int(i) for i in planted_features)), dtype=int)
    if planted.size and (planted.min() < 0 or planted.max() >= SPECTRUM_WIDTH):
        raise ValueError(f"planted feature index out of range [0, {SPECTRUM_WIDTH})")
    w0, w1 = cfg.water_band
    if planted.size and np.any((planted >= w0) & (planted < w1)):
        raise ValueError("planted feature falls inside the zeroed water band")
    signal_hormone = Hormone(cfg.signal_hormone).value

    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EC7]))
    grid = np.arange(SPECTRUM_WIDTH, dtype=float)

    # metabolite templates: fixed peak positions/shapes shared by all subjects
    templates = np.zeros((cfg.n_metabolites, SPECTRUM_WIDTH))
    lo, hi = cfg.peaks_per_metabolite
    for m in range(cfg.n_metabolites):
        for _ in range(rng.integers(lo, hi + 1)):
            centre = rng.uniform(0, SPECTRUM_WIDTH)
            width = rng.uniform(*cfg.peak_width)
            templates[m] += rng.uniform(0.3, 1.0) * np.exp(-0.5 * ((grid - centre) / width) ** 2)
    conc = rng.lognormal(mean=0.0, sigma=0.35, size=(n, cfg.n_metabolites))
    spectra = conc @ templates

    t = grid / SPECTRUM_WIDTH
    baseline_shapes = np.stack([np.ones_like(t), t, np.sin(np.pi * t)])
    spectra += rng.normal(0.05, 0.02, size=(n, 3)) @ baseline_shapes
    spectra += rng.normal(0.0, cfg.noise_sd, size=spectra.shape)

    code = {"low": -1.0, "normal": 0.0, "high": 1.0}
    bins = ConcentrationBins.default()
    concentrations = {}
    signal_classes = None
    for h in HORMONES:
        counts = _allocate(n, REFERENCE_FREQUENCIES[h])
        classes = rng.permutation(np.repeat(np.array(CLASSES, dtype=object), counts))
        values = np.empty(n)
        for c in CLASSES:
            a, b = bins.range_of(h, c)
            sel = classes == c
            values[sel] = rng.uniform(a, b, size=int(sel.sum()))
        missing = rng.random(n) < cfg.missing_hormone_rate
        values[missing] = np.nan
        concentrations[h] = values
        if h == signal_hormone:
            signal_classes = classes

    if planted.size and effect_size != 0:
        steps = np.array([code[c] for c in signal_classes])
        sd = spectra[:, planted].std(axis=0)
        spectra[:, planted] += effect_size * np.outer(steps, sd)
    spectra[:, w0:w1] = 0.0

    age = np.round(rng.normal(26.0, 4.0, size=n), 1)
    age[rng.random(n) < cfg.missing_age_rate] = np.nan
    return SpectraPanel(
        subject_id=tuple(f"S{seed}_{i:04d}" for i in range(n)),
        spectra=spectra,
        age_years=age,
        concentrations=concentrations,
    )


def default_planted_features(count: int = 20, seed: int = 0, config: SynthConfig | None = None) -> list[int]:
    """``count`` distinct spectrum columns outside the water band."""
    cfg = config or SynthConfig()
    w0, w1 = cfg.water_band
    allowed = np.array([i for i in range(SPECTRUM_WIDTH) if not w0 <= i < w1])
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x91A7]))
    return sorted(int(i) for i in rng.choice(allowed, size=count, replace=False))
