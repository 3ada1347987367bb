"""
Discrete joint distributions.
Probability vectors over a finite product grid whose correlation matrix is
as close as possible to a target under fixed marginals, found by projected
gradient descent on the grid probabilities.
"""

import itertools
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Optional, Sequence

import numpy as np
import structlog

from src.datagen.correlation import CorrelationSpec, rf_block
from src.errors import GridTooLargeError, SolverNotConvergedError

logger = structlog.get_logger()

MAX_GRID_SIZE = 3 ** 6
MAX_ITERATIONS = 50_000
CONSTRAINT_TOLERANCE = 1e-8
STATIONARITY_TOLERANCE = 1e-6
_PROJECTION_TOLERANCE = 1e-11
_MAX_PROJECTION_CYCLES = 2_000


def centered_binomial() -> tuple[np.ndarray, np.ndarray]:
    """Levels and probabilities of Binomial(2, 0.5) - 1."""
    return np.array([-1.0, 0.0, 1.0]), np.array([0.25, 0.5, 0.25])


@dataclass(frozen=True)
class JointDistribution:
    """Probabilities over the product of `levels`, last feature varying fastest."""

    levels: tuple[np.ndarray, ...]
    probs: np.ndarray

    def __post_init__(self):
        levels = tuple(np.asarray(lv, dtype=float) for lv in self.levels)
        probs = np.asarray(self.probs, dtype=float)
        if probs.size != int(np.prod([lv.size for lv in levels])):
            raise ValueError("probability vector does not match the grid size")
        if np.any(probs < -1e-12) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "probs", probs)

    @property
    def p(self) -> int:
        return len(self.levels)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(lv.size for lv in self.levels)

    @cached_property
    def atoms(self) -> np.ndarray:
        return _grid(self.levels)

    @cached_property
    def codes(self) -> np.ndarray:
        """Level index of every atom coordinate."""
        return np.array(list(itertools.product(*(range(lv.size) for lv in self.levels))), dtype=int)

    def marginal(self, j: int) -> np.ndarray:
        return np.bincount(self.codes[:, j], weights=self.probs, minlength=self.levels[j].size)

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        mean = self.probs @ self.atoms
        var = self.probs @ (self.atoms - mean) ** 2
        return mean, np.sqrt(var)

    def correlation(self) -> np.ndarray:
        mean, std = self.moments()
        z = (self.atoms - mean) / std
        return (z * self.probs[:, None]).T @ z


def _grid(levels: Sequence[np.ndarray]) -> np.ndarray:
    return np.array(list(itertools.product(*levels)), dtype=float)


def _marginal_constraints(levels, marginals):
    codes = np.array(list(itertools.product(*(range(len(lv)) for lv in levels))), dtype=int)
    rows, rhs = [], []
    for j, probs in enumerate(marginals):
        for k, prob in enumerate(probs):
            rows.append((codes[:, j] == k).astype(float))
            rhs.append(float(prob))
    return np.array(rows), np.array(rhs)


def _largest_eigenvalue(a: np.ndarray, iterations: int = 200) -> float:
    """Largest eigenvalue of a^T a by power iteration."""
    vector = np.ones(a.shape[1]) / np.sqrt(a.shape[1])
    value = 0.0
    for _ in range(iterations):
        image = a.T @ (a @ vector)
        norm = np.linalg.norm(image)
        if norm == 0:
            return 0.0
        vector = image / norm
        value = float(vector @ (a.T @ (a @ vector)))
    return value


class _FeasibleSetProjector:
    """Projection onto {E p = m} intersected with p >= 0 by Dykstra cycles."""

    def __init__(self, constraints: np.ndarray, rhs: np.ndarray):
        self.constraints = constraints
        self.rhs = rhs
        self.pinv = np.linalg.pinv(constraints)

    def affine(self, v: np.ndarray) -> np.ndarray:
        return v - self.pinv @ (self.constraints @ v - self.rhs)

    def residual(self, p: np.ndarray) -> float:
        return float(np.max(np.abs(self.constraints @ p - self.rhs)))

    def __call__(self, v: np.ndarray) -> np.ndarray:
        x = v
        correction = np.zeros_like(v)
        for _ in range(_MAX_PROJECTION_CYCLES):
            y = self.affine(x)
            shifted = y + correction
            x = np.maximum(shifted, 0.0)
            correction = shifted - x
            if self.residual(x) < _PROJECTION_TOLERANCE:
                break
        return x


def solve_discrete_joint(
    target: CorrelationSpec,
    marginals: Sequence[Sequence[float]],
    levels: Sequence[Sequence[float]],
    *,
    max_iter: int = MAX_ITERATIONS,
    start: Optional[np.ndarray] = None,
) -> JointDistribution:
    """
    Minimize ||corr(P) - target||_F^2 over grid probabilities with the given
    marginals, starting from the product of the marginals.
    """
    levels = [np.asarray(lv, dtype=float) for lv in levels]
    marginals = [np.asarray(m, dtype=float) / np.sum(m) for m in marginals]
    if len(levels) != target.p or len(marginals) != target.p:
        raise ValueError("need one level list and one marginal per feature")
    size = int(np.prod([lv.size for lv in levels]))
    if size > MAX_GRID_SIZE:
        raise GridTooLargeError(f"grid of {size} atoms exceeds {MAX_GRID_SIZE}")

    atoms = _grid(levels)
    mean = np.array([m @ lv for m, lv in zip(marginals, levels)])
    std = np.sqrt(np.array([m @ (lv - mu) ** 2 for m, lv, mu in zip(marginals, levels, mean)]))
    z = (atoms - mean) / std
    pairs = [(i, j) for i in range(target.p) for j in range(i + 1, target.p)]
    if not pairs:
        product = _product_measure(marginals)
        return JointDistribution(tuple(levels), product)
    quad = np.array([z[:, i] * z[:, j] for i, j in pairs])
    goal = np.array([target.matrix[i, j] for i, j in pairs])

    # ||C - Sigma||_F^2 = 2 ||quad p - goal||^2 (off-diagonal pairs; diagonal is fixed at 1)
    def objective(p):
        r = quad @ p - goal
        return 2.0 * float(r @ r)

    def gradient(p):
        return 4.0 * quad.T @ (quad @ p - goal)

    lipschitz = max(4.0 * _largest_eigenvalue(quad), 1e-12)
    constraints, rhs = _marginal_constraints(levels, marginals)
    project = _FeasibleSetProjector(constraints, rhs)

    current = _product_measure(marginals) if start is None else np.asarray(start, dtype=float)
    momentum_point, momentum, value = current, 1.0, objective(current)
    stationarity = np.inf
    for iteration in range(1, max_iter + 1):
        candidate = project(momentum_point - gradient(momentum_point) / lipschitz)
        stationarity = lipschitz * float(np.max(np.abs(momentum_point - candidate)))
        candidate_value = objective(candidate)
        if candidate_value > value:
            # restart the momentum when the objective goes up
            momentum_point, momentum = current, 1.0
            continue
        next_momentum = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * momentum ** 2))
        momentum_point = candidate + ((momentum - 1.0) / next_momentum) * (candidate - current)
        current, momentum, value = candidate, next_momentum, candidate_value
        if stationarity < STATIONARITY_TOLERANCE and project.residual(current) < CONSTRAINT_TOLERANCE:
            break
    else:
        report = {"objective": value, "stationarity": stationarity, "constraint_residual": project.residual(current)}
        logger.error("joint_solver_not_converged", iterations=max_iter, **report)
        raise SolverNotConvergedError(f"joint-distribution solver did not converge in {max_iter} iterations", report)

    probs = np.maximum(current, 0.0)
    probs /= probs.sum()
    logger.debug("joint_solved", iterations=iteration, objective=value, atoms=size)
    return JointDistribution(tuple(levels), probs)


def _product_measure(marginals: Sequence[np.ndarray]) -> np.ndarray:
    probs = np.ones(1)
    for m in marginals:
        probs = np.outer(probs, m).ravel()
    return probs


def sample_discrete(
    joint: JointDistribution,
    n: int,
    rng: np.random.Generator,
    tail: int = 0,
    tail_levels: Optional[np.ndarray] = None,
    tail_probs: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    n rows by inverse-CDF sampling over the atoms, followed by `tail`
    independent features drawn from (tail_levels, tail_probs).
    """
    cdf = np.cumsum(joint.probs)
    cdf[-1] = 1.0
    picks = np.minimum(np.searchsorted(cdf, rng.random(n), side="right"), cdf.size - 1)
    block = joint.atoms[picks]
    if tail <= 0:
        return block
    if tail_levels is None or tail_probs is None:
        tail_levels, tail_probs = centered_binomial()
    rest = rng.choice(np.asarray(tail_levels, dtype=float), size=(n, tail), p=np.asarray(tail_probs, dtype=float))
    return np.hstack([block, rest])


def two_binary_table(p_equal: float = 0.4) -> JointDistribution:
    """Two binary features with P(0,0) = P(1,1) = p_equal and P(0,1) = P(1,0) = 0.5 - p_equal."""
    off = 0.5 - p_equal
    return JointDistribution((np.array([0.0, 1.0]), np.array([0.0, 1.0])), np.array([p_equal, off, off, p_equal]))


@lru_cache(maxsize=None)
def rf_block_joint() -> JointDistribution:
    """The six-feature forest-study block under centered-binomial marginals."""
    levels, probs = centered_binomial()
    joint = solve_discrete_joint(CorrelationSpec(rf_block()), [probs] * 6, [levels] * 6)
    logger.info("rf_block_joint_solved", max_corr_error=float(np.max(np.abs(joint.correlation() - rf_block()))))
    return joint
