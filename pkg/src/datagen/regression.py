"""
Regression functions.
The seven forest-study models, the three gradient-descent-study models and
the small example functions used by the finite-distribution oracles.
All feature indices in this module are 0-based.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import structlog

logger = structlog.get_logger()

SIGNAL_VARIANCE_SAMPLE_SIZE = 10_000

SIGNAL_SETS: dict[int, tuple[int, ...]] = {
    1: (3,),
    2: (0, 3),
    3: (0, 1),
    4: (0, 1, 3),
    5: (0, 1),
    6: (0, 3),
    7: (0, 1, 3),
}

GD_BLOCK = 5
# in-block positions of the three signal groups, and where their blocks sit
# as a fraction of the block count
_GD_GROUPS = ((0.0, (0, 2)), (0.2, (0, 3)), (0.6, (0, 1, 2)))
GD_MODELS = (8, 9, 10)


def gd_signal_groups(p: int) -> tuple[tuple[int, ...], ...]:
    """
    Signal groups of the gradient-descent study. At P=1000 they are
    {1,3}, {201,204}, {601,602,603} (1-based); smaller P keep the in-block
    positions and scale the block offsets.
    """
    if p % GD_BLOCK != 0:
        raise ValueError(f"P must be a multiple of {GD_BLOCK}, got {p}")
    blocks = p // GD_BLOCK
    offsets = [int(np.floor(fraction * blocks)) for fraction, _ in _GD_GROUPS]
    if len(set(offsets)) != len(offsets):
        raise ValueError(f"P={p} is too small to place three signal blocks apart")
    return tuple(
        tuple(GD_BLOCK * offset + position for position in positions)
        for offset, (_, positions) in zip(offsets, _GD_GROUPS)
    )


def gd_signal_features(p: int) -> tuple[int, ...]:
    return tuple(j for group in gd_signal_groups(p) for j in group)


def _indicator(condition: np.ndarray) -> np.ndarray:
    return condition.astype(float)


@dataclass(frozen=True)
class RegressionSpec:
    """Regression model `model_id` with noise ratio `phi`; P is needed for models 8-10."""

    model_id: int
    phi: float = 0.1
    p: Optional[int] = None
    signal_variance: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        if self.model_id not in SIGNAL_SETS and self.model_id not in GD_MODELS:
            raise ValueError(f"unknown regression model {self.model_id}")
        if self.phi < 0:
            raise ValueError("phi must be nonnegative")
        if self.model_id in GD_MODELS:
            if self.p is None:
                raise ValueError(f"model {self.model_id} needs the feature count P")
            gd_signal_groups(self.p)

    @property
    def signal(self) -> tuple[int, ...]:
        if self.model_id in GD_MODELS:
            return gd_signal_features(self.p)
        return SIGNAL_SETS[self.model_id]

    def with_signal_variance(self, variance: float) -> "RegressionSpec":
        return RegressionSpec(self.model_id, self.phi, self.p, float(variance))

    @property
    def noise_variance(self) -> float:
        if self.signal_variance is None:
            raise ValueError("signal variance has not been estimated")
        return self.phi * self.signal_variance

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        needed = max(self.signal) + 1
        if x.shape[1] < needed:
            raise ValueError(f"model {self.model_id} needs at least {needed} features, got {x.shape[1]}")
        return _MODELS[self.model_id](x, self)


def _f1(x, spec):
    return x[:, 3].copy()


def _f2(x, spec):
    return x[:, 0] + x[:, 3]


def _f3(x, spec):
    return x[:, 0] + x[:, 1]


def _f4(x, spec):
    return x[:, 0] + x[:, 1] + x[:, 3]


def _f5(x, spec):
    return _indicator((x[:, 0] >= 0) & (x[:, 1] >= 0))


def _f6(x, spec):
    return _indicator((x[:, 0] >= 0) & (x[:, 3] >= 0))


def _f7(x, spec):
    return _indicator((x[:, 0] >= 0) & (x[:, 1] >= 0)) + _indicator(x[:, 3] >= 0)


def _f8(x, spec):
    return x[:, list(spec.signal)].sum(axis=1)


def _f9(x, spec):
    return (x[:, list(spec.signal)] >= 1).sum(axis=1).astype(float)


def _f10(x, spec):
    total = np.zeros(x.shape[0])
    for group in gd_signal_groups(spec.p):
        total += np.all(x[:, list(group)] >= 1, axis=1)
    return total


_MODELS: dict[int, Callable[[np.ndarray, RegressionSpec], np.ndarray]] = {
    1: _f1, 2: _f2, 3: _f3, 4: _f4, 5: _f5, 6: _f6, 7: _f7, 8: _f8, 9: _f9, 10: _f10,
}


def eval_regression(spec: RegressionSpec, x: np.ndarray) -> float:
    """f(x) for a single feature row."""
    return float(spec(np.asarray(x, dtype=float).reshape(1, -1))[0])


def estimate_signal_variance(
    f: Callable[[np.ndarray], np.ndarray],
    sampler: Callable[[int, np.random.Generator], np.ndarray],
    rng: np.random.Generator,
    n: int = SIGNAL_VARIANCE_SAMPLE_SIZE,
) -> float:
    """Sample variance of f(X) on a fresh draw of n rows from `sampler`."""
    variance = float(np.var(f(sampler(n, rng)), ddof=1))
    logger.debug("signal_variance_estimated", n=n, variance=variance)
    return variance


def add_noise(f_values: np.ndarray, phi: float, signal_variance: float, rng: np.random.Generator) -> np.ndarray:
    """f + eps with eps ~ N(0, phi * signal_variance); phi = 0 returns f unchanged."""
    f_values = np.asarray(f_values, dtype=float)
    if phi == 0 or signal_variance == 0:
        return f_values.copy()
    return f_values + rng.normal(0.0, np.sqrt(phi * signal_variance), size=f_values.shape)


# ─────────────────────────────────────────────────────────────────
# Example functions
# ─────────────────────────────────────────────────────────────────

def first_feature(x: np.ndarray) -> np.ndarray:
    """f(x) = x1."""
    return np.atleast_2d(x)[:, 0].astype(float)


def sum_of_first_two(x: np.ndarray) -> np.ndarray:
    """f(x) = x1 + x2, the response of the motivating and tradeoff designs."""
    x = np.atleast_2d(x)
    return x[:, 0] + x[:, 1]


def binary_effect_example(x: np.ndarray) -> np.ndarray:
    """On binary inputs: f(0,0)=0, f(0,1)=-3, f(1,0)=5, f(1,1)=2, i.e. 5 x1 - 3 x2."""
    x = np.atleast_2d(x)
    return 5.0 * x[:, 0] - 3.0 * x[:, 1]
