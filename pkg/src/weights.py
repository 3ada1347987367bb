"""
Sample weights.
Inverse stabilized-propensity weights, their Kish effective sample size, and
the cap-and-redistribute search that keeps the relative effective sample
size at a chosen minimum.
"""

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.errors import (
    DegenerateWeightsError,
    InfeasibleThresholdError,
    InvalidPropensityError,
    SearchNotConvergedError,
)

logger = structlog.get_logger()

MAX_BISECTION_STEPS = 64
_SUM_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SampleWeights:
    """Nonnegative weight vector normalized to sum 1."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("weights must be a nonempty vector")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("weights must be finite and >= 0")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return int(self.values.size)

    @classmethod
    def normalized(cls, raw: Union[Sequence[float], np.ndarray]) -> "SampleWeights":
        raw = np.asarray(raw, dtype=float)
        total = raw.sum()
        if not total > 0:
            raise DegenerateWeightsError("degenerate weights")
        return cls(raw / total)

    @classmethod
    def uniform(cls, n: int) -> "SampleWeights":
        return cls(np.full(n, 1.0 / n))

    @property
    def ess(self) -> float:
        return kish_ess(self)

    @property
    def relative_ess(self) -> float:
        return kish_ess(self) / self.n


class EssConfig(BaseModel):
    """Minimum relative effective sample size `eta` and search tolerance `alpha`.

    eta = 0 switches the adjustment off (plain inverse-propensity weights).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    eta: float = Field(default=0.25, ge=0.0, le=1.0)
    alpha: float = Field(default=0.01, gt=0.0)

    @model_validator(mode="after")
    def _alpha_below_eta(self) -> "EssConfig":
        if 0.0 < self.eta < 1.0 and self.alpha >= self.eta:
            raise ValueError(f"alpha ({self.alpha}) must be smaller than eta ({self.eta})")
        return self


WeightsLike = Union[SampleWeights, Sequence[float], np.ndarray]


def _values(w: WeightsLike) -> np.ndarray:
    if isinstance(w, SampleWeights):
        return w.values
    return np.asarray(w, dtype=float)


def kish_ess(w: WeightsLike) -> float:
    """Kish effective sample size ||w||_1^2 / ||w||_2^2."""
    values = _values(w)
    squares = float(np.dot(values, values))
    if not squares > 0:
        raise DegenerateWeightsError("degenerate weights")
    return float(values.sum()) ** 2 / squares


def relative_ess(w: WeightsLike) -> float:
    return kish_ess(w) / _values(w).size


def cap_and_redistribute(w: WeightsLike, theta: float) -> SampleWeights:
    """
    Cap every weight at `theta` and spread the excess uniformly over the
    weights still below it, repeating until no weight exceeds `theta`.
    Weights exactly at `theta` count as capped.
    """
    values = np.array(_values(w), dtype=float)
    n = values.size
    if theta * n < 1.0 - _SUM_TOLERANCE:
        raise InfeasibleThresholdError(f"infeasible threshold: theta={theta} < 1/N={1.0 / n}")

    for _ in range(n + 1):
        if values.max() <= theta:
            break
        capped = values >= theta
        excess = float((values[capped] - theta).sum())
        values[capped] = theta
        free = ~capped
        if not free.any():
            break
        values[free] += excess / free.sum()
    else:
        raise AssertionError("redistribution did not reach a fixed point")

    values /= values.sum()
    return SampleWeights(values)


def search_threshold(w: WeightsLike, cfg: EssConfig) -> SampleWeights:
    """
    Bisect on the cap theta in [1/(N eta), 1] until the capped weights have
    relative ESS within `alpha` of `eta`. Larger caps give smaller ESS.
    """
    weights = w if isinstance(w, SampleWeights) else SampleWeights(_values(w))
    n = weights.n
    if cfg.eta >= 1.0:
        return SampleWeights.uniform(n)
    if relative_ess(weights) >= cfg.eta:
        return weights

    lower, upper = 1.0 / (n * cfg.eta), 1.0
    best, best_gap = None, np.inf
    for step in range(MAX_BISECTION_STEPS):
        theta = 0.5 * (lower + upper)
        candidate = cap_and_redistribute(weights, theta)
        ess_rel = relative_ess(candidate)
        gap = abs(ess_rel - cfg.eta)
        if gap < best_gap:
            best, best_gap = candidate, gap
        if gap <= cfg.alpha:
            logger.debug("threshold_found", theta=theta, steps=step + 1, ess_rel=ess_rel)
            return candidate
        if ess_rel >= cfg.eta:
            lower = theta
        else:
            upper = theta

    logger.warning("threshold_search_not_converged", eta=cfg.eta, alpha=cfg.alpha, gap=best_gap)
    raise SearchNotConvergedError(
        f"threshold search did not reach eta={cfg.eta} within alpha={cfg.alpha}",
        best=best,
        gap=float(best_gap),
    )


def weights_from_propensities(p_hat: Union[Sequence[float], np.ndarray], cfg: EssConfig) -> SampleWeights:
    """Normalized inverse propensities, capped to relative ESS >= eta when needed."""
    p_hat = np.asarray(p_hat, dtype=float)
    if p_hat.size == 0 or not np.all(np.isfinite(p_hat)) or np.any(p_hat <= 0):
        raise InvalidPropensityError("invalid propensity: scores must be finite and > 0")

    if cfg.eta >= 1.0:
        return SampleWeights.uniform(p_hat.size)

    weights = SampleWeights.normalized(1.0 / p_hat)
    if cfg.eta == 0.0 or weights.relative_ess >= cfg.eta:
        return weights
    return search_threshold(weights, cfg)
