from .forest import FeatureImportance, RankingForest, feature_importance, score_forest, train_forest
from .leafrank import LeafRankSpec, default_leafrank, split_cost, train_leafrank
from .tree import RankingTree, TreeNode, leaf_score, score_tree, train_tree

__all__ = [
    "FeatureImportance",
    "LeafRankSpec",
    "RankingForest",
    "RankingTree",
    "TreeNode",
    "default_leafrank",
    "feature_importance",
    "leaf_score",
    "score_forest",
    "score_tree",
    "split_cost",
    "train_forest",
    "train_leafrank",
    "train_tree",
]
