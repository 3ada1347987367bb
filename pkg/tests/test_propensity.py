import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import norm

from src.datagen.joint import sample_discrete, two_binary_table
from src.dataset import Dataset, FeatureKind
from src.errors import ConstantFeatureError, DegenerateConditionalError, SchemaMismatchError
from src.metrics import weighted_corr
from src.propensity import (
    AdjustmentSet,
    LogisticSettings,
    StabilizerStats,
    adjustment_sets,
    correlation_matrix,
    fit_continuous_propensity,
    fit_discrete_propensity,
    fit_propensity,
    node_scores,
    select_adjustment_features,
    stabilized_scores,
)
from src.weights import EssConfig, weights_from_propensities

TERNARY = FeatureKind.discrete((-1.0, 0.0, 1.0))
BINARY = FeatureKind.discrete((0.0, 1.0))


def _bivariate_normal(rho: float, n: int, rng: np.random.Generator) -> Dataset:
    """x1 = rho x2 + sqrt(1 - rho^2) z with x2, z standard normal."""
    z = rng.standard_normal((n, 2))
    x = np.column_stack([rho * z[:, 1] + np.sqrt(1 - rho ** 2) * z[:, 0], z[:, 1]])
    return Dataset(x, x[:, 0])


class TestAdjustmentSelection:
    def test_top_features_by_importance_that_pass_the_threshold(self, continuous_data):
        adj = select_adjustment_features(continuous_data, 0, [0.1, 0.5, 0.4], q_max=2, corr_threshold=0.3)
        # x3 is independent of x1, so only x2 survives the correlation filter
        assert adj == AdjustmentSet(0, (1,))

    def test_q_max_zero_gives_no_adjusters(self, continuous_data):
        adj = select_adjustment_features(continuous_data, 1, [0.3, 0.3, 0.4], q_max=0, corr_threshold=0.0)
        assert adj.adjusters == ()

    def test_threshold_zero_keeps_the_top_q(self, continuous_data):
        adj = select_adjustment_features(continuous_data, 2, [0.5, 0.2, 0.3], q_max=1, corr_threshold=0.0)
        assert adj.adjusters == (0,)

    def test_importance_length_must_match(self, continuous_data):
        with pytest.raises(SchemaMismatchError):
            select_adjustment_features(continuous_data, 0, [0.5, 0.5], q_max=2, corr_threshold=0.1)

    def test_all_features_share_one_correlation_matrix(self, continuous_data):
        fi = [0.4, 0.4, 0.2]
        sets = adjustment_sets(continuous_data, fi, q_max=2, corr_threshold=0.1)
        for p in range(3):
            assert sets[p] == select_adjustment_features(continuous_data, p, fi, 2, 0.1)

    def test_constant_column_correlates_zero(self):
        x = np.column_stack([np.arange(5.0), np.ones(5)])
        corr = correlation_matrix(x)
        assert corr[0, 1] == 0.0
        assert_allclose(np.diag(corr), 1.0)

    def test_target_cannot_adjust_for_itself(self):
        with pytest.raises(ValueError):
            AdjustmentSet(1, (0, 1))


class TestDiscrete:
    def test_empty_adjusters_score_exactly_one(self, discrete_data):
        model = fit_discrete_propensity(discrete_data, AdjustmentSet(0))
        assert model.degenerate
        assert np.array_equal(stabilized_scores(model, discrete_data), np.ones(discrete_data.n))

    def test_conditional_probabilities_sum_to_one(self, discrete_data):
        model = fit_discrete_propensity(discrete_data, AdjustmentSet(0, (1,)))
        probs = model.class_probabilities(discrete_data.x)
        assert_allclose(probs.sum(axis=1), 1.0)

    def test_dependent_adjuster_moves_scores_away_from_one(self, discrete_data):
        dependent = fit_discrete_propensity(discrete_data, AdjustmentSet(0, (1,)))
        independent = fit_discrete_propensity(discrete_data, AdjustmentSet(0, (2,)))
        spread_dependent = np.std(stabilized_scores(dependent, discrete_data))
        spread_independent = np.std(stabilized_scores(independent, discrete_data))
        assert spread_dependent > 5 * spread_independent

    def test_agreeing_rows_score_above_one(self, discrete_data):
        model = fit_discrete_propensity(discrete_data, AdjustmentSet(0, (1,)))
        scores = stabilized_scores(model, discrete_data)
        agree = discrete_data.x[:, 0] == discrete_data.x[:, 1]
        assert scores[agree].mean() > 1.0 > scores[~agree].mean()

    def test_two_binary_table_scores(self, rng):
        x = sample_discrete(two_binary_table(0.4), 10_000, rng)
        data = Dataset(x, x[:, 0], (BINARY, BINARY))
        scores = stabilized_scores(fit_discrete_propensity(data, AdjustmentSet(0, (1,))), data)
        agree = x[:, 0] == x[:, 1]
        # P(x1 | x2) / P(x1) = 0.8 / 0.5 on the diagonal, 0.2 / 0.5 off it
        assert_allclose(scores[agree], 1.6, atol=0.05)
        assert_allclose(scores[~agree], 0.4, atol=0.05)

    def test_perfectly_correlated_pair(self, rng):
        column = rng.integers(0, 2, size=2_000).astype(float)
        data = Dataset(np.column_stack([column, column]), column, (BINARY, BINARY))
        grid = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
        model = fit_discrete_propensity(data, AdjustmentSet(0, (1,)))
        scores = model.scores(grid)
        assert np.all(scores[:2] > 1.9)
        assert np.all(scores[2:] < 0.05)
        # the floor bounds the conditional probability, the level frequency is about 0.5
        assert np.all(scores >= model.probability_floor)
        weights = 1.0 / scores
        assert weights[2:].min() > weights[:2].max()

        longer = fit_discrete_propensity(data, AdjustmentSet(0, (1,)), LogisticSettings(max_iter=2_000))
        assert np.all(longer.scores(grid)[2:] < scores[2:])

    def test_zero_iterations_reproduce_the_frequencies(self, discrete_data):
        model = fit_discrete_propensity(discrete_data, AdjustmentSet(0, (1,)), LogisticSettings(max_iter=0))
        assert_allclose(stabilized_scores(model, discrete_data), 1.0, atol=1e-12)

    def test_constant_target_in_node(self):
        x = np.column_stack([np.zeros(10), np.tile([-1.0, 1.0], 5)])
        with pytest.raises(ConstantFeatureError):
            fit_propensity(x, (TERNARY, TERNARY), AdjustmentSet(0, (1,)))

    def test_continuous_target_rejected(self, continuous_data):
        with pytest.raises(SchemaMismatchError):
            fit_discrete_propensity(continuous_data, AdjustmentSet(0))


class TestContinuous:
    def test_empty_adjusters_score_exactly_one(self, continuous_data):
        stats = StabilizerStats.of(continuous_data.x[:, 0])
        model = fit_continuous_propensity(continuous_data, AdjustmentSet(0), stats)
        assert np.array_equal(stabilized_scores(model, continuous_data), np.ones(continuous_data.n))

    def test_scores_are_a_normal_density_ratio(self, continuous_data):
        stats = StabilizerStats.of(continuous_data.x[:, 1])
        model = fit_continuous_propensity(continuous_data, AdjustmentSet(1, (0,)), stats)
        scores = stabilized_scores(model, continuous_data)
        assert np.all(scores > 0)
        # x2 = 0.8 x1 + 0.6 z: conditional variance 0.36 against a unit marginal
        assert model.resid_var == pytest.approx(0.36, rel=0.2)
        assert np.mean(np.log(scores)) > 0

    def test_matches_the_gaussian_closed_form(self, rng):
        rho = 0.8
        data = _bivariate_normal(rho, 1_000, rng)
        x1, x2 = data.x[:, 0], data.x[:, 1]
        model = fit_continuous_propensity(data, AdjustmentSet(0, (1,)), StabilizerStats.of(x1))
        exact = norm.pdf(x1 - rho * x2, scale=np.sqrt(1 - rho ** 2)) / norm.pdf(x1)
        relative_error = np.abs(stabilized_scores(model, data) / exact - 1)
        assert np.median(relative_error) <= 0.05

    def test_weights_decorrelate_a_bivariate_normal(self):
        data = _bivariate_normal(0.7, 5_000, np.random.default_rng(0))
        x1, x2 = data.x[:, 0], data.x[:, 1]
        model = fit_continuous_propensity(data, AdjustmentSet(0, (1,)), StabilizerStats.of(x1))
        scores = stabilized_scores(model, data)

        def corr_at(eta):
            return abs(weighted_corr(x1, x2, weights_from_propensities(scores, EssConfig(eta=eta, alpha=0.01)).values))

        tight, loose = corr_at(0.1), corr_at(0.5)
        assert tight <= 0.2
        assert tight < loose <= 0.35
        assert loose < abs(np.corrcoef(x1, x2)[0, 1]) - 0.3

    def test_determined_target_is_degenerate(self):
        x = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
        data = Dataset(x, np.arange(10.0))
        with pytest.raises(DegenerateConditionalError):
            fit_continuous_propensity(data, AdjustmentSet(1, (0,)), StabilizerStats.of(x[:, 1]))

    def test_constant_target_in_node(self):
        x = np.column_stack([np.ones(6), np.arange(6.0)])
        with pytest.raises(ConstantFeatureError):
            fit_propensity(x, (FeatureKind.continuous(),) * 2, AdjustmentSet(0, (1,)))

    def test_node_scores_fall_back_to_one(self):
        x = np.column_stack([np.ones(6), np.arange(6.0)])
        scores = node_scores(x, (FeatureKind.continuous(),) * 2, AdjustmentSet(0, (1,)))
        assert np.array_equal(scores, np.ones(6))


def test_scoring_data_with_another_schema_fails(continuous_data):
    model = fit_propensity(continuous_data.x, continuous_data.kinds, AdjustmentSet(0, (1,)))
    narrow = Dataset(continuous_data.x[:, :2], continuous_data.y)
    with pytest.raises(SchemaMismatchError):
        stabilized_scores(model, narrow)


@pytest.mark.parametrize("data_fixture, target", [("continuous_data", 1), ("discrete_data", 0)])
def test_adjuster_order_does_not_matter(request, data_fixture, target):
    data = request.getfixturevalue(data_fixture)
    others = [j for j in range(data.p) if j != target]
    forward = fit_propensity(data.x, data.kinds, AdjustmentSet(target, tuple(others)))
    backward = fit_propensity(data.x, data.kinds, AdjustmentSet(target, tuple(reversed(others))))
    assert np.array_equal(forward.scores(data.x), backward.scores(data.x))
