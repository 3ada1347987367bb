"""
Finite-distribution oracles.
Exact quantities on a JointDistribution by summation over its atoms: the
product measure, population losaw weights, marginal association and effect
functions, and the signal-feature check.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from src.datagen.joint import JointDistribution

_SIGNAL_TOLERANCE = 1e-12

Function = Callable[[np.ndarray], np.ndarray]


def _table(joint: JointDistribution) -> np.ndarray:
    return joint.probs.reshape(joint.shape)


def _axes_except(ndim: int, p: int) -> tuple[int, ...]:
    return tuple(axis for axis in range(ndim) if axis != p)


def product_measure(joint: JointDistribution, p: Optional[int] = None) -> np.ndarray:
    """
    P_p (x) P_-p as a probability vector over the atoms of `joint`; with
    `p=None`, the full product of the one-dimensional marginals.
    """
    table = _table(joint)
    if p is None:
        product = np.ones(())
        for j in range(joint.p):
            product = np.multiply.outer(product, joint.marginal(j))
        return product.ravel()
    marginal = table.sum(axis=_axes_except(joint.p, p), keepdims=True)
    rest = table.sum(axis=p, keepdims=True)
    return (marginal * rest).ravel()


def population_losaw_weights(joint: JointDistribution, p: int) -> np.ndarray:
    """
    Atomwise 1 / P_p(x) = P(X_p = x_p) P(X_-p = x_-p) / P(X = x).
    Atoms with probability 0 get weight 0.
    """
    target = product_measure(joint, p)
    weights = np.zeros_like(joint.probs)
    positive = joint.probs > 0
    weights[positive] = target[positive] / joint.probs[positive]
    return weights


def reweighted_distribution(joint: JointDistribution, p: int) -> np.ndarray:
    return joint.probs * population_losaw_weights(joint, p)


@dataclass(frozen=True)
class MarginalFunctions:
    """f^ass and f^eff over the levels of one feature; NaN where P(X_p = level) = 0."""

    levels: np.ndarray
    association: np.ndarray
    effect: np.ndarray


def marginal_functions(joint: JointDistribution, f: Function, p: int) -> MarginalFunctions:
    """
    E[f(X) | X_p = x] under the joint distribution (association) and under
    P_p (x) P_-p (effect), by direct summation.
    """
    table = _table(joint)
    values = np.asarray(f(joint.atoms), dtype=float).reshape(joint.shape)
    marginal = joint.marginal(p)
    rest = table.sum(axis=p)

    association = np.full(marginal.size, np.nan)
    effect = np.full(marginal.size, np.nan)
    for k in range(marginal.size):
        if marginal[k] <= 0:
            continue
        slice_probs = np.take(table, k, axis=p)
        slice_values = np.take(values, k, axis=p)
        association[k] = float(np.sum(slice_probs * slice_values) / marginal[k])
        effect[k] = float(np.sum(rest * slice_values))
    return MarginalFunctions(levels=joint.levels[p], association=association, effect=effect)


def is_signal_feature(f: Function, joint: JointDistribution, p: int) -> bool:
    """
    True when changing x_p alone changes f at some atom with positive
    probability under the product of the marginals.
    """
    values = np.asarray(f(joint.atoms), dtype=float).reshape(joint.shape)
    support = np.ix_(*[np.flatnonzero(joint.marginal(j) > 0) for j in range(joint.p)])
    restricted = values[support]
    return bool(np.any(np.ptp(restricted, axis=p) > _SIGNAL_TOLERANCE))
