"""Feature-set construction: raw, PCA and wavelet blocks, age, standardization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np
from numpy.typing import NDArray

from ..core import LabeledDataset
from ..data import AGE_FEATURE, SPECTRUM_COLUMNS, Standardizer, fit_standardizer
from ..decomp import PcaModel, fit_pca, pca_project
from ..wavelet import WaveletSpec, wavelet_features


@dataclass(frozen=True)
class FeaturePipeline:
    """Spectra-plus-age to standardized feature matrix.

    Fitted state is the PCA basis (``pca`` only) and the standardizer; the
    wavelet transforms are fixed maps.
    """

    feature_set: str
    levels: int
    pca: PcaModel | None
    standardizer: Standardizer
    names: tuple[str, ...]

    def block(self, spectra: NDArray) -> NDArray[np.float64]:
        return _block(self.feature_set, spectra, self.levels, self.pca)[0]

    def transform(self, spectra: NDArray, age: NDArray) -> NDArray[np.float64]:
        X = np.column_stack([self.block(spectra), age])
        return self.standardizer.transform(X)

    def to_dict(self) -> dict:
        return {
            "feature_set": self.feature_set,
            "levels": self.levels,
            "pca": None if self.pca is None else self.pca.to_dict(),
            "standardizer": self.standardizer.to_dict(),
            "names": list(self.names),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "FeaturePipeline":
        pca = None if d.get("pca") is None else PcaModel.from_dict(d["pca"])
        return cls(d["feature_set"], int(d["levels"]), pca, Standardizer.from_dict(d["standardizer"]),
                   tuple(d["names"]))


def _block(feature_set: str, spectra: NDArray, levels: int, pca: PcaModel | None
           ) -> tuple[NDArray[np.float64], tuple[str, ...]]:
    if feature_set == "raw":
        return np.asarray(spectra, dtype=float), SPECTRUM_COLUMNS[: spectra.shape[1]]
    if feature_set == "pca":
        Z = pca_project(pca, spectra)
        return Z, tuple(f"pc{i + 1:03d}" for i in range(Z.shape[1]))
    if feature_set in ("haar", "db4", "db8"):
        F, names = wavelet_features(spectra, WaveletSpec(feature_set, levels))
        return F, tuple(names)
    raise ValueError(f"unknown feature set {feature_set!r}")


def fit_pipeline(feature_set: str, spectra: NDArray, age: NDArray, pca_components: int = 100,
                 levels: int = 10) -> FeaturePipeline:
    """Fit PCA (if used) and the standardizer on the given rows."""
    pca = None
    if feature_set == "pca":
        k = min(pca_components, spectra.shape[0], spectra.shape[1])
        pca = fit_pca(spectra, k)
    F, names = _block(feature_set, spectra, levels, pca)
    X = np.column_stack([F, age])
    return FeaturePipeline(feature_set, levels, pca, fit_standardizer(X), names + (AGE_FEATURE,))


def pipeline_dataset(pipe: FeaturePipeline, spectra: NDArray, age: NDArray, labels: NDArray) -> LabeledDataset:
    return LabeledDataset(pipe.transform(spectra, age), labels, pipe.names)
