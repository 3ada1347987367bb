"""
Regression trees.
Recursive growth with per-feature losaw weights at every node; each inner
node keeps the statistics the modified MDI needs.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Any, Iterator, Optional

import numpy as np
import structlog

from src.dataset import Dataset
from src.forest.splits import NodeSample, Weigher, select_split, uniform_weigher

logger = structlog.get_logger()


@dataclass
class TreeNode:
    n_samples: int
    prediction: float
    mse: float
    feature: Optional[int] = None
    value: Optional[float] = None
    delta_rel: float = 0.0
    ess_rel: float = 1.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def to_dict(self) -> dict[str, Any]:
        payload: dict[str, Any] = {"n": self.n_samples, "prediction": self.prediction, "mse": self.mse}
        if not self.is_leaf:
            payload.update(
                feature=self.feature,
                value=self.value,
                delta_rel=self.delta_rel,
                ess_rel=self.ess_rel,
                left=self.left.to_dict(),
                right=self.right.to_dict(),
            )
        return payload

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "TreeNode":
        node = cls(
            n_samples=int(payload["n"]),
            prediction=float(payload["prediction"]),
            mse=float(payload["mse"]),
        )
        if "feature" in payload:
            node.feature = int(payload["feature"])
            node.value = float(payload["value"])
            node.delta_rel = float(payload["delta_rel"])
            node.ess_rel = float(payload.get("ess_rel", 1.0))
            node.left = cls.from_dict(payload["left"])
            node.right = cls.from_dict(payload["right"])
        return node


@dataclass
class Tree:
    root: TreeNode
    n_features: int

    def nodes(self) -> Iterator[TreeNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.extend((node.right, node.left))

    @cached_property
    def _arrays(self):
        features, values, lefts, rights, predictions = [], [], [], [], []

        def visit(node: TreeNode) -> int:
            index = len(features)
            features.append(-1 if node.is_leaf else node.feature)
            values.append(0.0 if node.is_leaf else node.value)
            predictions.append(node.prediction)
            lefts.append(-1)
            rights.append(-1)
            if not node.is_leaf:
                lefts[index] = visit(node.left)
                rights[index] = visit(node.right)
            return index

        visit(self.root)
        return (np.array(features), np.array(values), np.array(lefts), np.array(rights), np.array(predictions))

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Leaf predictions for every row of `x`; a row goes left when x[feature] <= value."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        features, values, lefts, rights, predictions = self._arrays
        position = np.zeros(x.shape[0], dtype=int)
        active = features[position] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            current = position[rows]
            go_left = x[rows, features[current]] <= values[current]
            position[rows] = np.where(go_left, lefts[current], rights[current])
            active = features[position] >= 0
        return predictions[position]

    def importance_pre(self) -> np.ndarray:
        """Unstandardized importance: sum of delta_rel * MSE_k * N_k per split feature."""
        fi = np.zeros(self.n_features)
        for node in self.nodes():
            if not node.is_leaf:
                fi[node.feature] += node.delta_rel * node.mse * node.n_samples
        return fi

    @property
    def n_splits(self) -> int:
        return sum(1 for node in self.nodes() if not node.is_leaf)


def _leaf(y: np.ndarray) -> TreeNode:
    return TreeNode(n_samples=int(y.size), prediction=float(np.mean(y)), mse=float(np.var(y)))


def grow_tree(
    bootstrap: Dataset,
    cfg,
    rng: np.random.Generator,
    weigher: Optional[Weigher] = None,
) -> Tree:
    """
    Grow one tree on `bootstrap`. `rng` draws the m_try candidates at every
    node (depth first, left before right). Leaves predict the unweighted mean.
    """
    if weigher is None:
        if cfg.eta < 1.0:
            raise ValueError("growing with eta < 1 needs a losaw weigher")
        weigher = uniform_weigher

    m_try = cfg.resolved_m_try(bootstrap.p)
    weighted_mse_mode = cfg.mse_mode == "weighted"

    def grow(rows: np.ndarray, depth: int) -> TreeNode:
        y = bootstrap.y[rows]
        node = _leaf(y)
        if depth >= cfg.max_depth or rows.size < 2 * cfg.min_leaf or np.ptp(y) == 0:
            return node

        candidates = rng.choice(bootstrap.p, size=m_try, replace=False)
        sample = NodeSample(rows=rows, x=bootstrap.x[rows], y=y)
        decision = select_split(sample, candidates, bootstrap.kinds, weigher, cfg.min_leaf)
        if decision is None:
            return node

        go_left = sample.x[:, decision.feature] <= decision.value
        node.feature = decision.feature
        node.value = decision.value
        node.delta_rel = decision.delta_rel
        node.ess_rel = decision.ess_rel
        if weighted_mse_mode:
            node.mse = decision.weighted_mse
        node.left = grow(rows[go_left], depth + 1)
        node.right = grow(rows[~go_left], depth + 1)
        return node

    root = grow(np.arange(bootstrap.n), 0)
    tree = Tree(root=root, n_features=bootstrap.p)
    logger.debug("tree_grown", splits=tree.n_splits, n=bootstrap.n)
    return tree
