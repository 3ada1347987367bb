"""
Evaluation metrics.
Prediction R^2, area under the precision-recall curve of a feature
importance ranking, the importance gap between signal and noise features,
and a weighted correlation diagnostic.
"""

from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from src.errors import DegenerateVarianceError

ArrayLike = Union[Sequence[float], np.ndarray]


@dataclass(frozen=True)
class EvalReport:
    r2_test: float
    r2_ind: float
    pr_auc: float
    fi_gap: float
    importance: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if not 0.0 <= self.pr_auc <= 1.0:
            raise ValueError(f"pr_auc must lie in [0, 1], got {self.pr_auc}")

    def metrics(self) -> dict[str, float]:
        row = asdict(self)
        row.pop("importance")
        return row


def r_squared(y: ArrayLike, y_hat: ArrayLike) -> float:
    """1 - SSE / SST, with SST about the mean of `y`."""
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {y_hat.shape}")
    if y.size < 2:
        raise DegenerateVarianceError("r_squared needs at least 2 observations")
    sst = float(np.sum((y - y.mean()) ** 2))
    if not sst > 0:
        raise DegenerateVarianceError("r_squared is undefined for a constant response")
    return 1.0 - float(np.sum((y - y_hat) ** 2)) / sst


def _signal_mask(p: int, signal: Iterable[int]) -> np.ndarray:
    mask = np.zeros(p, dtype=bool)
    mask[list(signal)] = True
    return mask


def pr_auc(fi: ArrayLike, signal: Iterable[int]) -> float:
    """
    Average precision of the ranking `fi` for recovering `signal`.
    Thresholds run over the distinct importance values from the top; features
    sharing a value enter together.
    """
    fi = np.asarray(fi, dtype=float)
    mask = _signal_mask(fi.size, signal)
    n_signal = int(mask.sum())
    if n_signal == 0 or n_signal == fi.size:
        raise ValueError("signal must be a nonempty proper subset of the features")

    thresholds = np.unique(fi)[::-1]
    # features at or above each threshold
    selected = fi[None, :] >= thresholds[:, None]
    true_positive = (selected & mask).sum(axis=1)
    precision = true_positive / selected.sum(axis=1)
    recall = true_positive / n_signal
    steps = np.diff(np.concatenate([[0.0], recall]))
    return float(np.sum(steps * precision))


def minmax_normalize(fi: ArrayLike) -> np.ndarray:
    """Affine map of `fi` onto [0, 1]; a constant vector maps to zeros."""
    fi = np.asarray(fi, dtype=float)
    span = float(fi.max() - fi.min())
    if span == 0:
        return np.zeros_like(fi)
    return (fi - fi.min()) / span


def fi_gap(fi_normalized: ArrayLike, signal: Iterable[int]) -> float:
    """Smallest signal importance minus largest noise importance, on [0, 1] scores."""
    s = np.asarray(fi_normalized, dtype=float)
    if s.size and (s.min() < 0.0 or s.max() > 1.0):
        raise ValueError("fi_gap expects importance scores normalized to [0, 1]")
    mask = _signal_mask(s.size, signal)
    if mask.all() or not mask.any():
        raise ValueError("signal must be a nonempty proper subset of the features")
    return float(s[mask].min() - s[~mask].max())


def weighted_corr(x: ArrayLike, y: ArrayLike, w: ArrayLike) -> float:
    """Pearson correlation of x and y under weights w."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    w = w / w.sum()
    dx = x - w @ x
    dy = y - w @ y
    var_x = float(w @ dx ** 2)
    var_y = float(w @ dy ** 2)
    if not (var_x > 0 and var_y > 0):
        raise DegenerateVarianceError("weighted correlation needs positive weighted variances")
    return float(w @ (dx * dy)) / np.sqrt(var_x * var_y)


def evaluate(
    y_test: ArrayLike,
    y_hat_test: ArrayLike,
    y_ind: ArrayLike,
    y_hat_ind: ArrayLike,
    fi: ArrayLike,
    signal: Sequence[int],
) -> EvalReport:
    fi = np.asarray(fi, dtype=float)
    return EvalReport(
        r2_test=r_squared(y_test, y_hat_test),
        r2_ind=r_squared(y_ind, y_hat_ind),
        pr_auc=pr_auc(fi, signal),
        fi_gap=fi_gap(minmax_normalize(fi), signal),
        importance=tuple(float(v) for v in fi),
    )
