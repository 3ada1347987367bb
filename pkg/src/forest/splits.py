"""
Split search.
Relative weighted impurity decrease and its exact maximization for one node,
one feature and one weight vector, plus the cross-feature selection step.
"""

from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from src.dataset import FeatureKind
from src.weights import SampleWeights

_PURE_RELATIVE = 1e-14


@dataclass(frozen=True)
class SplitDecision:
    feature: int
    value: float
    delta_rel: float
    # relative ESS and weighted MSE of the node under the winning feature's weights
    ess_rel: float = 1.0
    weighted_mse: float = 0.0


@dataclass(frozen=True)
class NodeSample:
    """Rows of one node: their indices into the tree sample, features and responses."""

    rows: np.ndarray
    x: np.ndarray
    y: np.ndarray

    @property
    def n(self) -> int:
        return int(self.rows.size)

    def weighted_stats(self, w: Union[SampleWeights, np.ndarray]) -> tuple[float, float]:
        """(S, T) = (sum w y^2, sum w y) under normalized weights."""
        values = _normalized(w)
        return float(values @ (self.y ** 2)), float(values @ self.y)


def _normalized(w) -> np.ndarray:
    values = w.values if isinstance(w, SampleWeights) else np.asarray(w, dtype=float)
    return values / values.sum()


def impurity_decrease(t_l: float, w_l: float, t: float) -> float:
    """
    Weighted impurity decrease of a split with left totals (T_L, W_L) in a node
    with T = sum w y and normalized weights:

        T_L^2 / W_L + (T - T_L)^2 / (1 - W_L) - T^2

    evaluated in the equivalent form W_L (1 - W_L) (mean_L - mean_R)^2.
    Zero when either side carries no weight.
    """
    if w_l <= 0.0 or w_l >= 1.0:
        return 0.0
    left_mean = t_l / w_l
    right_mean = (t - t_l) / (1.0 - w_l)
    return w_l * (1.0 - w_l) * (left_mean - right_mean) ** 2


def weighted_mse(y: np.ndarray, w) -> float:
    values = _normalized(w)
    mean = values @ y
    return float(values @ (y - mean) ** 2)


def _sweep(y_sorted, w_sorted, group_end, n_left, n, min_leaf, mse):
    """Relative decreases for splits after positions `group_end` of the sorted node."""
    mean = w_sorted @ y_sorted
    centered = w_sorted * (y_sorted - mean)
    w_left = np.cumsum(w_sorted)[group_end]
    t_left = np.cumsum(centered)[group_end]
    # suffix sums keep weight-empty right sides exactly zero
    w_right = np.cumsum(w_sorted[::-1])[::-1]
    t_right = np.cumsum(centered[::-1])[::-1]
    after = group_end + 1
    w_r = np.where(after < n, w_right[np.minimum(after, n - 1)], 0.0)
    t_r = np.where(after < n, t_right[np.minimum(after, n - 1)], 0.0)

    valid = (w_left > 0) & (w_r > 0) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
    total = w_left + w_r
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = np.where(valid, t_left / np.where(valid, w_left, 1.0) - t_r / np.where(valid, w_r, 1.0), 0.0)
        delta = np.where(valid, w_left * w_r / total ** 2 * gap ** 2, -np.inf)
    return np.minimum(delta / mse, 1.0)


def _node_mse(y, w):
    mse = weighted_mse(y, w)
    second_moment = float(w @ (y ** 2))
    if mse <= _PURE_RELATIVE * second_moment:
        return 0.0
    return mse


def best_split_continuous(
    x: np.ndarray, y: np.ndarray, w, min_leaf: int = 1
) -> tuple[Optional[float], float]:
    """
    Best threshold `x <= value` by one sweep over the node sorted on `x`.
    Returns (None, 0.0) when the node is pure or no threshold qualifies.
    """
    w = _normalized(w)
    mse = _node_mse(y, w)
    if mse == 0.0 or x.size < 2:
        return None, 0.0
    order = np.argsort(x, kind="stable")
    xs = x[order]
    boundary = np.flatnonzero(xs[:-1] < xs[1:])
    if boundary.size == 0:
        return None, 0.0
    rel = _sweep(y[order], w[order], boundary, boundary + 1, x.size, min_leaf, mse)
    best = int(np.argmax(rel))
    if not rel[best] > 0:
        return None, 0.0
    return float(xs[boundary[best]]), float(rel[best])


def best_split_discrete(
    x: np.ndarray, y: np.ndarray, w, levels: Sequence[float], min_leaf: int = 1
) -> tuple[Optional[float], float]:
    """Best split `x <= level` over the ordered levels; the top level sends everything left."""
    w = _normalized(w)
    mse = _node_mse(y, w)
    if mse == 0.0 or x.size < 2:
        return None, 0.0
    levels = np.asarray(levels, dtype=float)
    codes = np.searchsorted(levels, x, side="left")
    order = np.argsort(codes, kind="stable")
    sorted_codes = codes[order]
    # last sorted position holding a code <= k, for every level k
    group_end = np.searchsorted(sorted_codes, np.arange(levels.size), side="right") - 1
    n_left = group_end + 1
    present = group_end >= 0
    if not present.any():
        return None, 0.0
    rel = np.full(levels.size, -np.inf)
    rel[present] = _sweep(y[order], w[order], group_end[present], n_left[present], x.size, min_leaf, mse)
    best = int(np.argmax(rel))
    if not rel[best] > 0:
        return None, 0.0
    return float(levels[best]), float(rel[best])


def best_split(x, y, w, kind: FeatureKind, min_leaf: int = 1) -> tuple[Optional[float], float]:
    if kind.is_discrete:
        return best_split_discrete(x, y, w, kind.levels, min_leaf)
    return best_split_continuous(x, y, w, min_leaf)


Weigher = Callable[[NodeSample, int], SampleWeights]


def uniform_weigher(node: NodeSample, feature: int) -> SampleWeights:
    return SampleWeights.uniform(node.n)


def select_split(
    node: NodeSample,
    features: Iterable[int],
    kinds: Sequence[FeatureKind],
    weigher: Weigher = uniform_weigher,
    min_leaf: int = 1,
) -> Optional[SplitDecision]:
    """
    Highest relative decrease over the candidate features, each scored under
    its own weights. Ties go to the lowest feature index, then the lowest value.
    """
    best: Optional[SplitDecision] = None
    for feature in sorted(int(p) for p in features):
        weights = weigher(node, feature)
        value, delta_rel = best_split(node.x[:, feature], node.y, weights, kinds[feature], min_leaf)
        if value is None or delta_rel <= 0.0:
            continue
        if best is None or delta_rel > best.delta_rel:
            best = SplitDecision(
                feature=feature,
                value=value,
                delta_rel=delta_rel,
                ess_rel=weights.relative_ess,
                weighted_mse=weighted_mse(node.y, weights),
            )
    return best
