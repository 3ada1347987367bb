"""Locally weighted random forest: split search, trees, ensemble and MDI."""

from src.forest.ensemble import Forest, ForestConfig, fit_forest, mdi_importance, predict
from src.forest.splits import (
    NodeSample,
    SplitDecision,
    best_split_continuous,
    best_split_discrete,
    impurity_decrease,
    select_split,
)
from src.forest.tree import Tree, TreeNode, grow_tree

__all__ = [
    "Forest",
    "ForestConfig",
    "NodeSample",
    "SplitDecision",
    "Tree",
    "TreeNode",
    "best_split_continuous",
    "best_split_discrete",
    "fit_forest",
    "grow_tree",
    "impurity_decrease",
    "mdi_importance",
    "predict",
    "select_split",
]
