"""Bipartite ranking of NMR-style spectra: wavelet and PCA features, Ranking
Forests, RankBoost, Ranking SVM and nested cross-validated evaluation."""

from .core import LabeledDataset, RocCurve, auc, auc_from_roc, auc_pairwise, kendall_tau, roc_curve

__version__ = "0.1.0"

__all__ = [
    "LabeledDataset",
    "RocCurve",
    "auc",
    "auc_from_roc",
    "auc_pairwise",
    "kendall_tau",
    "roc_curve",
]
