"""
Correlation structures.
The six-feature block of the forest study, the five-feature motivating
example, the tradeoff design, and random block-diagonal matrices for the
gradient-descent study.
"""

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
import structlog
from scipy.linalg import block_diag

from src.errors import NotPositiveDefiniteError

logger = structlog.get_logger()

GD_BLOCK_SIZE = 5
MAX_SIGMA_RESAMPLES = 1000

# (row, col) pairs in 0-based block coordinates
GD_ALPHA_ENTRIES = ((0, 1), (0, 3))
GD_BETA_ENTRIES = ((1, 3),)


@dataclass(frozen=True)
class CorrelationSpec:
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError("correlation matrix must be square")
        if not np.array_equal(matrix, matrix.T):
            raise ValueError("correlation matrix must be exactly symmetric")
        if not np.all(np.diag(matrix) == 1.0):
            raise ValueError("correlation matrix must have unit diagonal")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def p(self) -> int:
        return int(self.matrix.shape[0])

    def cholesky(self) -> np.ndarray:
        try:
            return np.linalg.cholesky(self.matrix)
        except np.linalg.LinAlgError as e:
            raise NotPositiveDefiniteError(f"correlation matrix is not positive definite: {e}")

    def is_positive_definite(self) -> bool:
        try:
            self.cholesky()
        except NotPositiveDefiniteError:
            return False
        return True


def identity(p: int) -> CorrelationSpec:
    return CorrelationSpec(np.eye(p))


def rf_block() -> np.ndarray:
    """Heterogeneous block X1..X3 next to a homogeneous block X4..X6, 0.2 in between."""
    block = np.full((6, 6), 0.2)
    block[:3, :3] = [[1.0, 0.4, 0.8], [0.4, 1.0, 0.8], [0.8, 0.8, 1.0]]
    block[3:, 3:] = 0.9
    np.fill_diagonal(block, 1.0)
    return block


def rf_sigma(p: int) -> CorrelationSpec:
    """The six-feature block followed by p - 6 independent features."""
    if p < 6:
        raise ValueError(f"the forest-study design needs P >= 6, got {p}")
    return CorrelationSpec(block_diag(rf_block(), np.eye(p - 6)))


def tradeoff_sigma() -> CorrelationSpec:
    return rf_sigma(10)


def example_sigma(a: Optional[float], p: int = 5) -> CorrelationSpec:
    """
    Motivating-example matrix: `a` between X1 and X2, 0.8 between every other
    pair. `a=None` gives the identity.
    """
    if a is None:
        return identity(p)
    matrix = np.full((p, p), 0.8)
    matrix[0, 1] = matrix[1, 0] = a
    np.fill_diagonal(matrix, 1.0)
    return CorrelationSpec(matrix)


def sample_mvn(spec: CorrelationSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """n draws from N(0, spec) via the Cholesky factor."""
    factor = spec.cholesky()
    return rng.standard_normal((n, spec.p)) @ factor.T


def _gd_block(rng: np.random.Generator, variant: str) -> np.ndarray:
    alpha = rng.uniform(0.7, 1.0)
    beta = rng.uniform(0.0, 0.4)
    if variant == "template":
        block = np.full((GD_BLOCK_SIZE, GD_BLOCK_SIZE), beta)
    else:
        raw = rng.standard_normal((GD_BLOCK_SIZE, GD_BLOCK_SIZE))
        gram = raw @ raw.T
        scale = np.sqrt(np.diag(gram))
        block = gram / np.outer(scale, scale)
        for i, j in GD_BETA_ENTRIES:
            block[i, j] = block[j, i] = beta
    for i, j in GD_ALPHA_ENTRIES:
        block[i, j] = block[j, i] = alpha
    np.fill_diagonal(block, 1.0)
    # exact symmetry
    return np.triu(block) + np.triu(block, 1).T


def build_gd_block(
    rng: np.random.Generator, variant: Literal["overwrite", "template"] = "overwrite"
) -> CorrelationSpec:
    """One positive-definite 5x5 block; redrawn until Cholesky succeeds."""
    for attempt in range(MAX_SIGMA_RESAMPLES):
        spec = CorrelationSpec(_gd_block(rng, variant))
        if spec.is_positive_definite():
            logger.debug("gd_block_built", attempts=attempt + 1, variant=variant)
            return spec
    raise NotPositiveDefiniteError(f"no positive-definite block in {MAX_SIGMA_RESAMPLES} draws")


def build_gd_sigma(
    rng: np.random.Generator,
    p: int = 50,
    variant: Literal["overwrite", "template"] = "overwrite",
) -> CorrelationSpec:
    """Block-diagonal matrix repeating one random 5x5 block."""
    if p % GD_BLOCK_SIZE != 0:
        raise ValueError(f"P must be a multiple of {GD_BLOCK_SIZE}, got {p}")
    block = build_gd_block(rng, variant).matrix
    return CorrelationSpec(block_diag(*([block] * (p // GD_BLOCK_SIZE))))
