"""
Feature and response generation.
Each design pairs a feature generator (joint draws plus draws from the
product of the marginals) with a response function and a noise level.
"""

from dataclasses import dataclass
from typing import Callable, Literal, Optional, Protocol

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.dataset import Dataset, FeatureKind
from src.datagen.correlation import (
    CorrelationSpec,
    build_gd_sigma,
    example_sigma,
    rf_sigma,
    sample_mvn,
    tradeoff_sigma,
)
from src.datagen.joint import (
    JointDistribution,
    centered_binomial,
    rf_block_joint,
    sample_discrete,
    solve_discrete_joint,
)
from src.datagen.regression import (
    GD_BLOCK,
    GD_MODELS,
    SIGNAL_SETS,
    RegressionSpec,
    add_noise,
    estimate_signal_variance,
    sum_of_first_two,
)
from src.rng import substream

logger = structlog.get_logger()

DesignName = Literal["example", "tradeoff", "rf-study", "gd-study"]


def binomial_levels() -> tuple[np.ndarray, np.ndarray]:
    """Levels and probabilities of Binomial(2, 0.5)."""
    return np.array([0.0, 1.0, 2.0]), np.array([0.25, 0.5, 0.25])


class DesignConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    design: DesignName = "rf-study"
    # None picks continuous, except for the gd-study which is always discrete
    data_kind: Optional[Literal["continuous", "discrete"]] = None
    p: int = Field(default=10, ge=2)
    regression: int = Field(default=3, ge=1, le=10)
    phi: float = Field(default=0.1, ge=0.0)
    # correlation of X1 and X2 in the example design; None is the identity
    example_a: Optional[float] = Field(default=0.5, gt=-1.0, lt=1.0)
    sigma_variant: Literal["overwrite", "template"] = "overwrite"
    noise_sample_size: int = Field(default=10_000, ge=2)

    @model_validator(mode="after")
    def _check_design(self) -> "DesignConfig":
        if self.design == "rf-study":
            if self.regression not in SIGNAL_SETS:
                raise ValueError("the rf-study design uses regression models 1-7")
            if self.p < 6:
                raise ValueError("the rf-study design needs p >= 6")
        elif self.design == "gd-study":
            if self.regression not in GD_MODELS:
                raise ValueError("the gd-study design uses regression models 8-10")
            if self.data_kind == "continuous":
                raise ValueError("the gd-study design has discrete features only")
            if self.p % GD_BLOCK != 0 or self.p < 5 * GD_BLOCK:
                raise ValueError(f"the gd-study design needs p a multiple of {GD_BLOCK}, at least {5 * GD_BLOCK}")
        elif self.design == "tradeoff":
            if self.p != 10:
                raise ValueError("the tradeoff design has p = 10")
            if self.data_kind == "discrete":
                raise ValueError("the tradeoff design has continuous features only")
        elif self.data_kind == "discrete":
            raise ValueError("the example design has continuous features only")
        return self

    @property
    def kind(self) -> str:
        if self.data_kind is not None:
            return self.data_kind
        return "discrete" if self.design == "gd-study" else "continuous"


class FeatureGenerator(Protocol):
    kinds: tuple[FeatureKind, ...]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray: ...

    def sample_independent(self, n: int, rng: np.random.Generator) -> np.ndarray: ...


@dataclass(frozen=True)
class GaussianGenerator:
    """N(0, Sigma) features; the product of marginals is N(0, I)."""

    sigma: CorrelationSpec

    @property
    def p(self) -> int:
        return self.sigma.p

    @property
    def kinds(self) -> tuple[FeatureKind, ...]:
        return tuple(FeatureKind.continuous() for _ in range(self.p))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return sample_mvn(self.sigma, n, rng)

    def sample_independent(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal((n, self.p))


@dataclass(frozen=True)
class DiscreteBlockGenerator:
    """
    Independent copies of discrete blocks side by side, followed by `tail`
    features drawn iid from (tail_levels, tail_probs).
    """

    blocks: tuple[JointDistribution, ...]
    tail: int = 0
    tail_levels: Optional[np.ndarray] = None
    tail_probs: Optional[np.ndarray] = None
    # correlation the blocks were solved against, when one exists
    target_correlation: Optional[CorrelationSpec] = None

    def _tail_marginal(self) -> tuple[np.ndarray, np.ndarray]:
        if self.tail_levels is None or self.tail_probs is None:
            return centered_binomial()
        return np.asarray(self.tail_levels, dtype=float), np.asarray(self.tail_probs, dtype=float)

    def marginals(self) -> list[tuple[np.ndarray, np.ndarray]]:
        columns = [(joint.levels[j], joint.marginal(j)) for joint in self.blocks for j in range(joint.p)]
        return columns + [self._tail_marginal()] * self.tail

    @property
    def p(self) -> int:
        return sum(joint.p for joint in self.blocks) + self.tail

    @property
    def kinds(self) -> tuple[FeatureKind, ...]:
        return tuple(FeatureKind.discrete(levels) for levels, _ in self.marginals())

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        parts = [sample_discrete(joint, n, rng) for joint in self.blocks]
        if self.tail > 0:
            levels, probs = self._tail_marginal()
            parts.append(rng.choice(levels, size=(n, self.tail), p=probs))
        return np.hstack(parts)

    def sample_independent(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.column_stack([rng.choice(levels, size=n, p=probs) for levels, probs in self.marginals()])


@dataclass(frozen=True)
class SyntheticDesign:
    """A feature generator, a response function and the noise variance added to it."""

    config: DesignConfig
    generator: FeatureGenerator
    response: Callable[[np.ndarray], np.ndarray]
    signal: tuple[int, ...]
    noise_variance: float
    # whether the product-of-marginals evaluation set carries noise too
    noisy_independent: bool = False

    @property
    def p(self) -> int:
        return len(self.generator.kinds)

    def _responses(self, x: np.ndarray, rng: np.random.Generator, noisy: bool) -> np.ndarray:
        f_values = self.response(x)
        if not noisy:
            return f_values
        return add_noise(f_values, 1.0, self.noise_variance, rng)

    def dataset(self, n: int, rng: np.random.Generator) -> Dataset:
        x = self.generator.sample(n, rng)
        return Dataset(x, self._responses(x, rng, True), self.generator.kinds)

    def independent_dataset(self, n: int, rng: np.random.Generator) -> Dataset:
        """Features from the product of the marginals; noisy only when `noisy_independent`."""
        x = self.generator.sample_independent(n, rng)
        return Dataset(x, self._responses(x, rng, self.noisy_independent), self.generator.kinds)


def _rf_generator(cfg: DesignConfig) -> FeatureGenerator:
    if cfg.kind == "continuous":
        return GaussianGenerator(rf_sigma(cfg.p))
    return DiscreteBlockGenerator(blocks=(rf_block_joint(),), tail=cfg.p - 6)


def _gd_generator(cfg: DesignConfig, rng: np.random.Generator) -> FeatureGenerator:
    sigma = build_gd_sigma(rng, cfg.p, cfg.sigma_variant)
    block = CorrelationSpec(sigma.matrix[:GD_BLOCK, :GD_BLOCK])
    levels, probs = binomial_levels()
    joint = solve_discrete_joint(block, [probs] * GD_BLOCK, [levels] * GD_BLOCK)
    return DiscreteBlockGenerator(blocks=(joint,) * (cfg.p // GD_BLOCK), target_correlation=sigma)


def build_design(cfg: DesignConfig, seed: int) -> SyntheticDesign:
    """
    Materialize `cfg` for one Monte-Carlo run. Random parts (the gd-study
    block and the signal-variance sample) come from streams of `seed`.
    """
    if cfg.design in ("example", "tradeoff"):
        sigma = example_sigma(cfg.example_a, cfg.p) if cfg.design == "example" else tradeoff_sigma()
        return SyntheticDesign(
            config=cfg,
            generator=GaussianGenerator(sigma),
            response=sum_of_first_two,
            signal=(0, 1),
            noise_variance=1.0,
        )

    if cfg.design == "rf-study":
        generator = _rf_generator(cfg)
    else:
        generator = _gd_generator(cfg, substream(seed, "sigma"))
    spec = RegressionSpec(cfg.regression, cfg.phi, cfg.p)
    signal_variance = estimate_signal_variance(
        spec, generator.sample, substream(seed, "signal_variance"), cfg.noise_sample_size
    )
    spec = spec.with_signal_variance(signal_variance)
    logger.debug("design_built", design=cfg.design, kind=cfg.kind, p=cfg.p, noise_variance=spec.noise_variance)
    return SyntheticDesign(
        config=cfg,
        generator=generator,
        response=spec,
        signal=spec.signal,
        noise_variance=spec.noise_variance,
        noisy_independent=cfg.design == "gd-study",
    )
