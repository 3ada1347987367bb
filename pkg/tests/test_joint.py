import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import chisquare

from src.datagen.correlation import CorrelationSpec, identity, rf_block
from src.datagen.joint import (
    JointDistribution,
    centered_binomial,
    rf_block_joint,
    sample_discrete,
    solve_discrete_joint,
    two_binary_table,
)
from src.datagen.oracles import product_measure
from src.errors import GridTooLargeError, SolverNotConvergedError


class TestJointDistribution:
    def test_two_binary_table(self):
        joint = two_binary_table()
        assert_allclose(joint.probs, [0.4, 0.1, 0.1, 0.4])
        assert_allclose(joint.marginal(0), [0.5, 0.5])
        # covariance 0.4 - 0.25 over variance 0.25
        assert joint.correlation()[0, 1] == pytest.approx(0.6)

    def test_last_feature_varies_fastest(self):
        joint = two_binary_table()
        assert_allclose(joint.atoms, [[0, 0], [0, 1], [1, 0], [1, 1]])

    def test_rejects_a_non_distribution(self):
        with pytest.raises(ValueError):
            JointDistribution((np.array([0.0, 1.0]),), np.array([0.7, 0.7]))
        with pytest.raises(ValueError):
            JointDistribution((np.array([0.0, 1.0]),), np.array([1.0]))


class TestSolver:
    def test_identity_target_recovers_the_product_measure(self):
        levels, probs = centered_binomial()
        joint = solve_discrete_joint(identity(3), [probs] * 3, [levels] * 3)
        assert_allclose(joint.probs, product_measure(joint), atol=1e-10)
        assert np.sum((joint.correlation() - np.eye(3)) ** 2) < 1e-8

    def test_two_features_reach_a_feasible_correlation(self):
        levels, probs = centered_binomial()
        target = CorrelationSpec(np.array([[1.0, 0.5], [0.5, 1.0]]))
        joint = solve_discrete_joint(target, [probs] * 2, [levels] * 2)
        assert joint.correlation()[0, 1] == pytest.approx(0.5, abs=1e-3)
        for j in range(2):
            assert_allclose(joint.marginal(j), probs, atol=1e-6)
        assert joint.probs.min() >= 0

    def test_unequal_marginals(self):
        levels = [np.array([0.0, 1.0]), np.array([0.0, 1.0, 2.0])]
        marginals = [np.array([0.3, 0.7]), np.array([0.2, 0.5, 0.3])]
        target = CorrelationSpec(np.array([[1.0, 0.3], [0.3, 1.0]]))
        joint = solve_discrete_joint(target, marginals, levels)
        assert_allclose(joint.marginal(0), marginals[0], atol=1e-6)
        assert_allclose(joint.marginal(1), marginals[1], atol=1e-6)
        assert joint.correlation()[0, 1] == pytest.approx(0.3, abs=1e-3)

    def test_grid_cap(self):
        levels, probs = centered_binomial()
        with pytest.raises(GridTooLargeError):
            solve_discrete_joint(identity(7), [probs] * 7, [levels] * 7)

    def test_iteration_cap_reports_residuals(self):
        levels, probs = centered_binomial()
        target = CorrelationSpec(np.array([[1.0, 0.6], [0.6, 1.0]]))
        with pytest.raises(SolverNotConvergedError) as info:
            solve_discrete_joint(target, [probs] * 2, [levels] * 2, max_iter=1)
        assert set(info.value.report) == {"objective", "stationarity", "constraint_residual"}

    @pytest.mark.slow
    def test_forest_study_block(self):
        joint = rf_block_joint()
        levels, probs = centered_binomial()
        for j in range(6):
            assert np.max(np.abs(joint.marginal(j) - probs)) < 1e-3
        assert abs(joint.probs.sum() - 1.0) < 1e-8
        assert np.max(np.abs(joint.correlation() - rf_block())) < 0.05


class TestSampling:
    def test_atom_frequencies(self, rng):
        joint = two_binary_table()
        draws = sample_discrete(joint, 100_000, rng)
        codes = (draws[:, 0] * 2 + draws[:, 1]).astype(int)
        observed = np.bincount(codes, minlength=4)
        assert chisquare(observed, joint.probs * draws.shape[0]).pvalue > 0.001

    def test_tail_features(self, rng):
        draws = sample_discrete(two_binary_table(), 50_000, rng, tail=2)
        assert draws.shape == (50_000, 4)
        levels, probs = centered_binomial()
        counts = np.array([(draws[:, 3] == level).sum() for level in levels])
        assert chisquare(counts, probs * 50_000).pvalue > 0.001
        assert abs(np.corrcoef(draws[:, 0], draws[:, 2])[0, 1]) < 0.03
