"""
Stabilized propensity scores.
Estimates P(x_p | x_-p) / P(x_p) for one target feature from a set of
adjustment features: multinomial logistic regression against level
frequencies for discrete targets, linear-Gaussian residuals against a
full-sample normal for continuous ones.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import softmax
from scipy.stats import norm

from src.dataset import Dataset, FeatureKind
from src.errors import (
    ConstantFeatureError,
    DegenerateConditionalError,
    SchemaMismatchError,
)

logger = structlog.get_logger()

RIDGE = 1e-8
RESIDUAL_VARIANCE_FLOOR = 1e-12
_LOG_RATIO_BOUND = 700.0


class LogisticSettings(BaseModel):
    """Full-batch gradient descent settings for the multinomial model."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    max_iter: int = Field(default=200, ge=0)
    learning_rate: float = Field(default=0.1, gt=0.0)
    l2: float = Field(default=1e-4, ge=0.0)
    tolerance: float = Field(default=1e-8, ge=0.0)
    probability_floor: float = Field(default=1e-6, gt=0.0, lt=1.0)


@dataclass(frozen=True)
class AdjustmentSet:
    target: int
    adjusters: tuple[int, ...] = ()

    def __post_init__(self):
        adjusters = tuple(int(j) for j in self.adjusters)
        if self.target in adjusters:
            raise ValueError(f"target {self.target} cannot adjust for itself")
        if len(set(adjusters)) != len(adjusters):
            raise ValueError("adjusters must be distinct")
        object.__setattr__(self, "adjusters", adjusters)


@dataclass(frozen=True)
class StabilizerStats:
    """Full-training-sample normal parameters of a continuous feature."""

    mean: float
    var: float

    @classmethod
    def of(cls, column: np.ndarray) -> "StabilizerStats":
        return cls(float(np.mean(column)), float(np.var(column)))


@dataclass(frozen=True)
class PropensityModel:
    kind: FeatureKind
    target: int
    adjusters: tuple[int, ...]
    n_features: int
    # Degenerate models score every observation exactly 1.
    degenerate: bool = False
    adjuster_levels: tuple = ()
    design_mean: Optional[np.ndarray] = None
    design_scale: Optional[np.ndarray] = None
    coef: Optional[np.ndarray] = None
    intercept: Optional[np.ndarray] = None
    # discrete stabilizer
    class_freq: Optional[np.ndarray] = None
    probability_floor: float = 1e-6
    # continuous
    resid_var: Optional[float] = None
    stabilizer: Optional[StabilizerStats] = None

    def class_probabilities(self, x: np.ndarray) -> np.ndarray:
        """Conditional level probabilities per row, before flooring (discrete only)."""
        if not self.kind.is_discrete:
            raise TypeError("class probabilities exist only for discrete targets")
        if self.degenerate:
            return np.tile(self.class_freq, (x.shape[0], 1))
        raw = _design(x, self.adjusters, self.adjuster_levels, one_hot=True)
        design = _standardize(raw, self.design_mean, self.design_scale)
        return softmax(design @ self.coef + self.intercept, axis=1)

    def scores(self, x: np.ndarray) -> np.ndarray:
        """Stabilized propensity per row of the full feature matrix `x`."""
        n = x.shape[0]
        if self.degenerate:
            return np.ones(n)
        if self.kind.is_discrete:
            codes = _level_codes(x[:, self.target], self.kind)
            conditional = self.class_probabilities(x)[np.arange(n), codes]
            conditional = np.maximum(conditional, self.probability_floor)
            marginal = np.maximum(self.class_freq[codes], self.probability_floor)
            return conditional / marginal

        raw = _design(x, self.adjusters, self.adjuster_levels, one_hot=False)
        design = _standardize(raw, self.design_mean, self.design_scale)
        residual = x[:, self.target] - (design @ self.coef + float(self.intercept))
        log_conditional = norm.logpdf(residual, loc=0.0, scale=np.sqrt(self.resid_var))
        log_marginal = norm.logpdf(x[:, self.target], loc=self.stabilizer.mean, scale=np.sqrt(self.stabilizer.var))
        return np.exp(np.clip(log_conditional - log_marginal, -_LOG_RATIO_BOUND, _LOG_RATIO_BOUND))


# ─────────────────────────────────────────────────────────────────
# Adjustment feature selection
# ─────────────────────────────────────────────────────────────────

def correlation_matrix(x: np.ndarray) -> np.ndarray:
    """Pearson correlations; constant columns correlate 0 with everything."""
    centered = x - x.mean(axis=0)
    scale = np.sqrt((centered ** 2).sum(axis=0))
    scale[scale == 0] = np.inf
    unit = centered / scale
    corr = unit.T @ unit
    np.fill_diagonal(corr, 1.0)
    return corr


def _select(corr_row: np.ndarray, target: int, initial_fi: np.ndarray, q_max: int, corr_threshold: float) -> AdjustmentSet:
    order = np.argsort(-np.asarray(initial_fi, dtype=float), kind="stable")
    ranked = [int(j) for j in order if j != target][: max(q_max, 0)]
    kept = tuple(j for j in ranked if abs(corr_row[j]) >= corr_threshold)
    return AdjustmentSet(target, kept)


def select_adjustment_features(
    data: Dataset,
    target: int,
    initial_fi: Sequence[float],
    q_max: int,
    corr_threshold: float,
) -> AdjustmentSet:
    """Top `q_max` features by preliminary importance whose |corr| with the target passes the threshold."""
    if len(initial_fi) != data.p:
        raise SchemaMismatchError(f"initial importance has {len(initial_fi)} entries for {data.p} features")
    if not 0.0 <= corr_threshold < 1.0:
        raise ValueError("corr_threshold must lie in [0, 1)")
    column = data.x[:, target]
    centered = data.x - data.x.mean(axis=0)
    target_centered = column - column.mean()
    denom = np.sqrt((centered ** 2).sum(axis=0) * (target_centered ** 2).sum())
    with np.errstate(invalid="ignore", divide="ignore"):
        corr_row = np.where(denom > 0, centered.T @ target_centered / denom, 0.0)
    return _select(corr_row, target, np.asarray(initial_fi), q_max, corr_threshold)


def adjustment_sets(
    data: Dataset,
    initial_fi: Sequence[float],
    q_max: int,
    corr_threshold: float,
) -> dict[int, AdjustmentSet]:
    """`select_adjustment_features` for every feature, sharing one correlation matrix."""
    if len(initial_fi) != data.p:
        raise SchemaMismatchError(f"initial importance has {len(initial_fi)} entries for {data.p} features")
    corr = correlation_matrix(data.x)
    fi = np.asarray(initial_fi, dtype=float)
    return {p: _select(corr[p], p, fi, q_max, corr_threshold) for p in range(data.p)}


# ─────────────────────────────────────────────────────────────────
# Design matrices
# ─────────────────────────────────────────────────────────────────

def _level_codes(column: np.ndarray, kind: FeatureKind) -> np.ndarray:
    levels = np.asarray(kind.levels)
    codes = np.clip(np.searchsorted(levels, column), 0, len(levels) - 1)
    if not np.array_equal(levels[codes], column):
        raise SchemaMismatchError("discrete feature holds values outside its levels")
    return codes


def _design(x, adjusters, adjuster_levels, one_hot):
    """Adjuster columns; discrete adjusters become one-hot blocks when `one_hot`."""
    blocks = []
    for j, levels in zip(adjusters, adjuster_levels):
        column = x[:, j]
        if one_hot and levels is not None:
            blocks.append((column[:, None] == np.asarray(levels)[None, :]).astype(float))
        else:
            blocks.append(column[:, None])
    if not blocks:
        return np.zeros((x.shape[0], 0))
    return np.hstack(blocks)


def _standardize(design, mean, scale):
    return (design - mean) / scale


def _column_stats(design):
    mean = design.mean(axis=0)
    scale = design.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


def _degenerate(kind, target, adjusters, n_features, **extra) -> PropensityModel:
    return PropensityModel(kind=kind, target=target, adjusters=adjusters, n_features=n_features, degenerate=True, **extra)


# ─────────────────────────────────────────────────────────────────
# Fitting
# ─────────────────────────────────────────────────────────────────

def _fit_discrete(x, kinds, adj: AdjustmentSet, settings: LogisticSettings) -> PropensityModel:
    kind = kinds[adj.target]
    n = x.shape[0]
    codes = _level_codes(x[:, adj.target], kind)
    counts = np.bincount(codes, minlength=kind.n_levels)
    if np.count_nonzero(counts) < 2:
        raise ConstantFeatureError(f"constant feature {adj.target} in node")
    freq = counts / n
    adjusters = tuple(sorted(adj.adjusters))
    if not adjusters:
        return _degenerate(kind, adj.target, adjusters, x.shape[1], class_freq=freq,
                           probability_floor=settings.probability_floor)

    adjuster_levels = tuple(kinds[j].levels for j in adjusters)
    raw = _design(x, adjusters, adjuster_levels, one_hot=True)
    mean, scale = _column_stats(raw)
    design = _standardize(raw, mean, scale)
    targets = np.zeros((n, kind.n_levels))
    targets[np.arange(n), codes] = 1.0

    coef = np.zeros((design.shape[1], kind.n_levels))
    intercept = np.log(np.maximum(freq, settings.probability_floor))
    for iteration in range(settings.max_iter):
        residual = (softmax(design @ coef + intercept, axis=1) - targets) / n
        grad_coef = design.T @ residual + settings.l2 * coef
        grad_intercept = residual.sum(axis=0)
        grad_norm = np.sqrt(np.sum(grad_coef ** 2) + np.sum(grad_intercept ** 2))
        if grad_norm < settings.tolerance:
            break
        coef -= settings.learning_rate * grad_coef
        intercept -= settings.learning_rate * grad_intercept

    return PropensityModel(
        kind=kind,
        target=adj.target,
        adjusters=adjusters,
        n_features=x.shape[1],
        adjuster_levels=adjuster_levels,
        design_mean=mean,
        design_scale=scale,
        coef=coef,
        intercept=intercept,
        class_freq=freq,
        probability_floor=settings.probability_floor,
    )


def _fit_continuous(x, kinds, adj: AdjustmentSet, stats: StabilizerStats) -> PropensityModel:
    kind = kinds[adj.target]
    n = x.shape[0]
    column = x[:, adj.target]
    if np.ptp(column) == 0:
        raise ConstantFeatureError(f"constant feature {adj.target} in node")
    if not stats.var > 0:
        raise ConstantFeatureError(f"feature {adj.target} is constant in the training sample")
    adjusters = tuple(sorted(adj.adjusters))
    if not adjusters:
        return _degenerate(kind, adj.target, adjusters, x.shape[1], stabilizer=stats)
    if n < len(adjusters) + 2:
        raise DegenerateConditionalError(f"{n} rows cannot support {len(adjusters)} adjusters")

    adjuster_levels = tuple(kinds[j].levels for j in adjusters)
    raw = _design(x, adjusters, adjuster_levels, one_hot=False)
    mean, scale = _column_stats(raw)
    design = _standardize(raw, mean, scale)
    target_mean = column.mean()
    gram = design.T @ design + RIDGE * np.eye(design.shape[1])
    coef = np.linalg.solve(gram, design.T @ (column - target_mean))
    residual = column - target_mean - design @ coef
    resid_var = float(np.mean(residual ** 2))
    if resid_var <= RESIDUAL_VARIANCE_FLOOR:
        raise DegenerateConditionalError(f"feature {adj.target} is determined by its adjusters")

    return PropensityModel(
        kind=kind,
        target=adj.target,
        adjusters=adjusters,
        n_features=x.shape[1],
        adjuster_levels=adjuster_levels,
        design_mean=mean,
        design_scale=scale,
        coef=coef,
        intercept=np.asarray(target_mean),
        resid_var=resid_var,
        stabilizer=stats,
    )


def fit_propensity(
    x: np.ndarray,
    kinds: Sequence[FeatureKind],
    adj: AdjustmentSet,
    *,
    stats: Optional[StabilizerStats] = None,
    settings: Optional[LogisticSettings] = None,
) -> PropensityModel:
    """Fit the propensity model of `adj.target` on the rows of `x`, dispatching on its kind."""
    if kinds[adj.target].is_discrete:
        return _fit_discrete(x, kinds, adj, settings or LogisticSettings())
    if stats is None:
        stats = StabilizerStats.of(x[:, adj.target])
    return _fit_continuous(x, kinds, adj, stats)


def fit_discrete_propensity(
    data: Dataset, adj: AdjustmentSet, settings: Optional[LogisticSettings] = None
) -> PropensityModel:
    if not data.kinds[adj.target].is_discrete:
        raise SchemaMismatchError(f"feature {adj.target} is not discrete")
    return _fit_discrete(data.x, data.kinds, adj, settings or LogisticSettings())


def fit_continuous_propensity(
    data: Dataset, adj: AdjustmentSet, full_sample_stats: StabilizerStats
) -> PropensityModel:
    if data.kinds[adj.target].is_discrete:
        raise SchemaMismatchError(f"feature {adj.target} is not continuous")
    return _fit_continuous(data.x, data.kinds, adj, full_sample_stats)


def stabilized_scores(model: PropensityModel, data: Dataset) -> np.ndarray:
    if data.p != model.n_features or data.kinds[model.target] != model.kind:
        raise SchemaMismatchError(
            f"schema mismatch: model fitted on {model.n_features} features, data has {data.p}"
        )
    return model.scores(data.x)


def node_scores(
    x: np.ndarray,
    kinds: Sequence[FeatureKind],
    adj: AdjustmentSet,
    *,
    stats: Optional[StabilizerStats] = None,
    settings: Optional[LogisticSettings] = None,
) -> np.ndarray:
    """Scores on the rows of `x`, with constant or degenerate targets scored exactly 1."""
    try:
        model = fit_propensity(x, kinds, adj, stats=stats, settings=settings)
    except (ConstantFeatureError, DegenerateConditionalError) as e:
        logger.debug("propensity_fallback_uniform", target=adj.target, reason=str(e))
        return np.ones(x.shape[0])
    return model.scores(x)
