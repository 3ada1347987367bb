"""
Self-check battery.
Closed-form and exhaustive oracles run in-process against the library:
weight machinery, split search, the joint-distribution solver, population
reweighting, marginal effect functions and the evaluation metrics.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import structlog

from src.dataset import FeatureKind
from src.datagen.correlation import identity
from src.datagen.joint import centered_binomial, rf_block_joint, solve_discrete_joint, two_binary_table
from src.datagen.oracles import marginal_functions, product_measure, reweighted_distribution
from src.datagen.regression import SIGNAL_SETS, RegressionSpec, binary_effect_example, first_feature
from src.forest.splits import NodeSample, select_split
from src.metrics import fi_gap, pr_auc, r_squared
from src.weights import EssConfig, SampleWeights, cap_and_redistribute, kish_ess, relative_ess, weights_from_propensities

logger = structlog.get_logger()


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _weighted_mse(y, w):
    total = w.sum()
    if total <= 0:
        return 0.0
    mean = (w @ y) / total
    return float(w @ (y - mean) ** 2) / total


def exhaustive_split(
    x: np.ndarray,
    y: np.ndarray,
    weights: Sequence[np.ndarray],
    kinds: Sequence[FeatureKind],
    min_leaf: int = 1,
) -> Optional[tuple[int, float, float]]:
    """
    Brute-force (feature, value, relative decrease): every feature, every
    threshold, impurity computed directly from the weighted child MSEs.
    Thresholds leaving fewer than `min_leaf` rows on either side are skipped.
    Ties keep the lowest feature, then the lowest value.
    """
    best = None
    for feature in range(x.shape[1]):
        w = np.asarray(weights[feature], dtype=float)
        w = w / w.sum()
        parent = _weighted_mse(y, w)
        if parent <= 1e-14 * float(w @ y ** 2):
            continue
        column = x[:, feature]
        candidates = kinds[feature].levels if kinds[feature].is_discrete else np.unique(column)
        for value in sorted(candidates):
            left = column <= value
            if left.sum() < min_leaf or (~left).sum() < min_leaf:
                continue
            w_left, w_right = w[left].sum(), w[~left].sum()
            if w_left <= 0 or w_right <= 0:
                continue
            children = w_left * _weighted_mse(y[left], w[left]) + w_right * _weighted_mse(y[~left], w[~left])
            delta_rel = min((parent - children) / parent, 1.0)
            if delta_rel > 0 and (best is None or delta_rel > best[2]):
                best = (feature, float(value), float(delta_rel))
    return best


# ─────────────────────────────────────────────────────────────────
# Checks
# ─────────────────────────────────────────────────────────────────

def check_kish_examples() -> CheckResult:
    values = [kish_ess([0.25] * 4), kish_ess([1, 0, 0, 0, 0]), kish_ess([0.5, 0.25, 0.25])]
    expected = [4.0, 1.0, 1.0 / 0.375]
    ok = np.allclose(values, expected, rtol=0, atol=1e-12)
    return CheckResult("kish_examples", bool(ok), f"got {values}")


def check_weight_properties(instances: int = 1000, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    for i in range(instances):
        n = int(rng.integers(2, 40))
        w = SampleWeights.normalized(rng.exponential(size=n) ** 3)
        theta = float(rng.uniform(1.0 / n, 1.0))
        capped = cap_and_redistribute(w, theta)
        if abs(capped.values.sum() - 1) > 1e-12 or capped.values.max() > theta + 1e-12:
            return CheckResult("weight_properties", False, f"instance {i}: normalization or cap violated")
        again = cap_and_redistribute(capped, theta)
        if not np.allclose(again.values, capped.values, rtol=0, atol=1e-12):
            return CheckResult("weight_properties", False, f"instance {i}: not idempotent")
        looser = cap_and_redistribute(w, min(1.0, theta + float(rng.uniform(0.0, 0.5))))
        if relative_ess(looser) > relative_ess(capped) + 1e-12:
            return CheckResult("weight_properties", False, f"instance {i}: relative ESS grew with the cap")
        eta = float(rng.uniform(0.05, 0.95))
        cfg = EssConfig(eta=eta, alpha=min(0.01, eta / 2))
        out = weights_from_propensities(1.0 / w.values, cfg)
        if w.relative_ess < eta and abs(relative_ess(out) - eta) > cfg.alpha:
            return CheckResult("weight_properties", False, f"instance {i}: relative ESS off target")
    return CheckResult("weight_properties", True, f"{instances} instances")


def check_split_oracle(nodes: int = 200, seed: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)
    for i in range(nodes):
        n = int(rng.integers(4, 60))
        p = int(rng.integers(1, 6))
        discrete = bool(rng.integers(0, 2))
        if discrete:
            levels = (-1.0, 0.0, 1.0)
            x = rng.choice(levels, size=(n, p))
            kinds = [FeatureKind.discrete(levels)] * p
        else:
            x = rng.standard_normal((n, p))
            kinds = [FeatureKind.continuous()] * p
        y = rng.standard_normal(n)
        weights = [rng.uniform(0.1, 1.0, size=n) for _ in range(p)]
        min_leaf = int(rng.integers(1, 8))
        node = NodeSample(rows=np.arange(n), x=x, y=y)
        decision = select_split(
            node, range(p), kinds, lambda _node, j: SampleWeights.normalized(weights[j]), min_leaf=min_leaf
        )
        expected = exhaustive_split(x, y, weights, kinds, min_leaf)
        if decision is None or expected is None:
            if decision is not expected:
                return CheckResult("split_oracle", False, f"node {i}: one side found no split")
            continue
        if (decision.feature, decision.value) != expected[:2] or abs(decision.delta_rel - expected[2]) > 1e-10:
            return CheckResult("split_oracle", False, f"node {i}: {decision} vs {expected}")
    return CheckResult("split_oracle", True, f"{nodes} nodes")


def check_joint_identity() -> CheckResult:
    levels, probs = centered_binomial()
    joint = solve_discrete_joint(identity(3), [probs] * 3, [levels] * 3)
    error = float(np.max(np.abs(joint.probs - product_measure(joint))))
    objective = float(np.sum((joint.correlation() - np.eye(3)) ** 2))
    return CheckResult("joint_identity", error < 1e-10 and objective < 1e-8, f"max atom error {error:.2e}")


def check_population_reweighting() -> CheckResult:
    joint = two_binary_table()
    errors = [np.max(np.abs(reweighted_distribution(joint, p) - product_measure(joint, p))) for p in range(2)]
    return CheckResult("population_reweighting", max(errors) < 1e-12, f"max atom error {max(errors):.2e}")


def check_marginal_examples() -> CheckResult:
    joint = two_binary_table()
    linear = marginal_functions(joint, first_feature, 1)
    effect = marginal_functions(joint, binary_effect_example, 1)
    ok = (
        np.allclose(linear.association, [0.2, 0.8])
        and np.allclose(linear.effect, [0.5, 0.5])
        and np.allclose(effect.association, [1.0, 1.0])
        and np.allclose(effect.effect, [2.5, -0.5])
    )
    return CheckResult("marginal_examples", bool(ok))


def check_noise_features_have_constant_effect() -> CheckResult:
    joint = rf_block_joint()
    for model_id, signal in SIGNAL_SETS.items():
        spec = RegressionSpec(model_id)
        for p in range(joint.p):
            if p in signal:
                continue
            effect = marginal_functions(joint, spec, p).effect
            if np.ptp(effect) > 1e-10:
                return CheckResult("noise_effect_constant", False, f"f{model_id}, feature {p + 1}")
    return CheckResult("noise_effect_constant", True, "f1-f7")


def check_metric_examples() -> CheckResult:
    ok = (
        abs(r_squared([0, 1, 2], [0, 1, 1]) - 0.5) < 1e-12
        and abs(pr_auc(np.ones(6), [0, 1]) - 1 / 3) < 1e-12
        and abs(pr_auc([5, 4, 3, 2, 1, 0], [0, 1]) - 1.0) < 1e-12
        and abs(fi_gap([1.0, 0.8, 0.3, 0.1], [0, 1]) - 0.5) < 1e-12
    )
    return CheckResult("metric_examples", bool(ok))


CHECKS: list[Callable[[], CheckResult]] = [
    check_kish_examples,
    check_weight_properties,
    check_split_oracle,
    check_joint_identity,
    check_population_reweighting,
    check_marginal_examples,
    check_noise_features_have_constant_effect,
    check_metric_examples,
]


def run_selfcheck() -> list[CheckResult]:
    results = []
    for check in CHECKS:
        try:
            result = check()
        except Exception as e:  # a crashing check is a failing check
            result = CheckResult(check.__name__.removeprefix("check_"), False, f"{type(e).__name__}: {e}")
        logger.info("selfcheck", check=result.name, passed=result.passed)
        results.append(result)
    return results
