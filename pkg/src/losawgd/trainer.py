"""
Mini-batch training.
losaw training draws a target feature by saliency at every step and samples
the batch with replacement from that feature's reweighted population; the
standard trainer walks shuffled epochs with uniform batches. Both use Adam.
"""

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.dataset import Dataset
from src.errors import SearchNotConvergedError
from src.losawgd.network import DenseNet, backward, output_input_gradients
from src.losawgd.optim import Adam
from src.propensity import AdjustmentSet, LogisticSettings, StabilizerStats, adjustment_sets, node_scores
from src.rng import substream
from src.weights import EssConfig, SampleWeights, weights_from_propensities

logger = structlog.get_logger()

SaliencyMode = Literal["clamp", "minmax"]


class GdConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    steps: int = Field(default=400, ge=0)
    batch_size: int = Field(default=254, ge=1)
    learning_rate: float = Field(default=0.001, ge=0.0)
    eta: float = Field(default=0.2, ge=0.0, le=1.0)
    alpha: float = Field(default=0.01, gt=0.0)
    seed: int = Field(default=0, ge=0)
    hidden: tuple[int, ...] = (64, 32)
    # None keeps every feature that passes the correlation threshold
    q_max: Optional[int] = Field(default=None, ge=0)
    corr_threshold: float = Field(default=0.1, ge=0.0, lt=1.0)
    saliency_mode: SaliencyMode = "clamp"
    cache_propensities: bool = False
    logistic: LogisticSettings = Field(default_factory=LogisticSettings)

    @model_validator(mode="after")
    def _check_ess(self) -> "GdConfig":
        EssConfig(eta=self.eta, alpha=self.alpha)
        if any(width < 1 for width in self.hidden):
            raise ValueError("hidden widths must be >= 1")
        return self

    @property
    def ess(self) -> EssConfig:
        return EssConfig(eta=self.eta, alpha=self.alpha)


@dataclass(frozen=True)
class TraceRow:
    step: int
    feature: int
    batch_ess: float
    loss: float


def init_network(p: int, cfg: GdConfig) -> DenseNet:
    """Initial network of the run `cfg.seed`; both trainers start from it."""
    return DenseNet.initialize(p, cfg.hidden, substream(cfg.seed, "init"))


def saliency(net: DenseNet, x: np.ndarray, mode: SaliencyMode = "clamp") -> np.ndarray:
    """
    Mean absolute input gradient per feature, normalized to sum 1.
    `clamp` clips every per-row term to [0, 1] before averaging; `minmax`
    averages raw magnitudes and rescales the map to [0, 1].
    All-zero maps become uniform.
    """
    magnitude = np.abs(output_input_gradients(net, x))
    if mode == "clamp":
        scores = np.clip(magnitude, 0.0, 1.0).mean(axis=0)
    elif mode == "minmax":
        scores = magnitude.mean(axis=0)
        span = scores.max() - scores.min()
        scores = (scores - scores.min()) / span if span > 0 else np.zeros_like(scores)
    else:
        raise ValueError(f"unknown saliency mode {mode!r}")
    total = scores.sum()
    if not total > 0:
        return np.full(scores.size, 1.0 / scores.size)
    return scores / total


def gd_importance(net: DenseNet, data: Dataset, mode: SaliencyMode = "clamp") -> np.ndarray:
    return saliency(net, data.x, mode)


class _FeatureWeights:
    """losaw weights of each target feature on the full training set."""

    def __init__(self, data: Dataset, adjustment: dict[int, AdjustmentSet], cfg: GdConfig):
        self.data = data
        self.adjustment = adjustment
        self.cfg = cfg
        self.stats = {
            p: StabilizerStats.of(data.x[:, p]) for p, kind in enumerate(data.kinds) if not kind.is_discrete
        }
        self._cache: dict[int, SampleWeights] = {}

    def __call__(self, feature: int) -> SampleWeights:
        if self.cfg.eta >= 1.0:
            return SampleWeights.uniform(self.data.n)
        if self.cfg.cache_propensities and feature in self._cache:
            return self._cache[feature]
        scores = node_scores(
            self.data.x,
            self.data.kinds,
            self.adjustment[feature],
            stats=self.stats.get(feature),
            settings=self.cfg.logistic,
        )
        try:
            weights = weights_from_propensities(scores, self.cfg.ess)
        except SearchNotConvergedError as e:
            weights = e.best
        if self.cfg.cache_propensities:
            self._cache[feature] = weights
        return weights


def train_losawgd(data: Dataset, net: DenseNet, cfg: GdConfig) -> tuple[DenseNet, list[TraceRow]]:
    """
    `cfg.steps` Adam steps on batches of `cfg.batch_size` rows drawn with
    replacement in proportion to the losaw weights of a saliency-drawn feature.
    """
    net = net.copy()
    trace: list[TraceRow] = []
    if cfg.steps == 0:
        return net, trace

    q_max = data.p if cfg.q_max is None else cfg.q_max
    initial_fi = saliency(net, data.x, cfg.saliency_mode)
    weigh = _FeatureWeights(data, adjustment_sets(data, initial_fi, q_max, cfg.corr_threshold), cfg)
    optimizer = Adam(learning_rate=cfg.learning_rate)
    feature_rng = substream(cfg.seed, "feature")
    batch_rng = substream(cfg.seed, "batch")

    for step in range(cfg.steps):
        scores = saliency(net, data.x, cfg.saliency_mode)
        feature = int(feature_rng.choice(data.p, p=scores))
        weights = weigh(feature)
        rows = batch_rng.choice(data.n, size=cfg.batch_size, replace=True, p=weights.values)
        loss, grads = backward(net, data.x[rows], data.y[rows])
        optimizer.step(net.parameters(), grads.parameters())
        trace.append(TraceRow(step=step, feature=feature, batch_ess=weights.ess, loss=loss))
        logger.debug("losawgd_step", step=step, feature=feature, loss=loss)

    logger.info("losawgd_trained", steps=cfg.steps, eta=cfg.eta, final_loss=trace[-1].loss)
    return net, trace


def train_standard(data: Dataset, net: DenseNet, cfg: GdConfig) -> DenseNet:
    """
    Uniform batches without replacement, reshuffling when an epoch runs out;
    a final partial batch is dropped.
    """
    net = net.copy()
    if cfg.steps == 0:
        return net
    optimizer = Adam(learning_rate=cfg.learning_rate)
    batch_rng = substream(cfg.seed, "batch")
    batch_size = min(cfg.batch_size, data.n)
    order, position = batch_rng.permutation(data.n), 0
    loss = float("nan")
    for step in range(cfg.steps):
        if position + batch_size > data.n:
            order, position = batch_rng.permutation(data.n), 0
        rows = order[position : position + batch_size]
        position += batch_size
        loss, grads = backward(net, data.x[rows], data.y[rows])
        optimizer.step(net.parameters(), grads.parameters())
    logger.info("standard_trained", steps=cfg.steps, final_loss=loss)
    return net
