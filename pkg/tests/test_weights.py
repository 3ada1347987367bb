import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from src.errors import (
    DegenerateWeightsError,
    InfeasibleThresholdError,
    InvalidPropensityError,
    SearchNotConvergedError,
)
from src.weights import (
    EssConfig,
    SampleWeights,
    cap_and_redistribute,
    kish_ess,
    relative_ess,
    search_threshold,
    weights_from_propensities,
)


class TestKish:
    def test_uniform_weights_count_every_observation(self):
        assert kish_ess([0.25] * 4) == pytest.approx(4.0, abs=1e-12)

    def test_single_nonzero_weight_counts_once(self):
        assert kish_ess([1, 0, 0, 0, 0]) == pytest.approx(1.0, abs=1e-12)

    def test_uneven_weights(self):
        assert kish_ess([0.5, 0.25, 0.25]) == pytest.approx(1 / 0.375, abs=1e-12)

    def test_scale_invariant(self):
        assert kish_ess([2.0, 1.0, 1.0]) == pytest.approx(kish_ess([0.5, 0.25, 0.25]))

    def test_all_zero_is_degenerate(self):
        with pytest.raises(DegenerateWeightsError):
            kish_ess([0.0, 0.0])

    def test_relative_ess_is_at_most_one(self, rng):
        w = rng.exponential(size=50)
        assert 0 < relative_ess(w) <= 1


class TestSampleWeights:
    def test_normalized_sums_to_one(self):
        w = SampleWeights.normalized([1, 2, 3, 4])
        assert w.values.sum() == pytest.approx(1.0)

    def test_rejects_negative_values(self):
        with pytest.raises(ValueError):
            SampleWeights(np.array([0.5, -0.1, 0.6]))

    def test_normalized_rejects_zero_total(self):
        with pytest.raises(DegenerateWeightsError):
            SampleWeights.normalized([0.0, 0.0])

    def test_values_are_read_only(self):
        w = SampleWeights.uniform(3)
        with pytest.raises(ValueError):
            w.values[0] = 1.0


class TestEssConfig:
    def test_alpha_must_be_below_eta(self):
        with pytest.raises(ValidationError):
            EssConfig(eta=0.2, alpha=0.3)

    def test_eta_one_ignores_alpha(self):
        assert EssConfig(eta=1.0, alpha=5.0).eta == 1.0

    def test_eta_out_of_range(self):
        with pytest.raises(ValidationError):
            EssConfig(eta=1.5)


class TestCapAndRedistribute:
    def test_caps_and_redistributes(self):
        capped = cap_and_redistribute([0.7, 0.1, 0.1, 0.1], 0.4)
        assert_allclose(capped.values, [0.4, 0.2, 0.2, 0.2], atol=1e-12)

    def test_redistribution_can_cap_again(self):
        capped = cap_and_redistribute([0.5, 0.3, 0.1, 0.1], 0.3)
        assert capped.values.max() <= 0.3 + 1e-12
        assert capped.values.sum() == pytest.approx(1.0, abs=1e-12)

    def test_theta_one_over_n_gives_uniform(self):
        capped = cap_and_redistribute([0.7, 0.2, 0.1], 1 / 3)
        assert_allclose(capped.values, np.full(3, 1 / 3), atol=1e-12)

    def test_infeasible_threshold(self):
        with pytest.raises(InfeasibleThresholdError):
            cap_and_redistribute([0.5, 0.5], 0.4)

    def test_properties_on_random_instances(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 40))
            w = SampleWeights.normalized(rng.exponential(size=n) ** 3)
            theta = float(rng.uniform(1 / n, 1.0))
            capped = cap_and_redistribute(w, theta)
            assert capped.values.sum() == pytest.approx(1.0, abs=1e-12)
            assert capped.values.max() <= theta + 1e-12
            assert_allclose(cap_and_redistribute(capped, theta).values, capped.values, atol=1e-12)

    def test_relative_ess_grows_as_the_cap_tightens(self, rng):
        w = SampleWeights.normalized(rng.exponential(size=30) ** 4)
        thetas = np.linspace(1 / 30, w.values.max(), 12)
        ess = [relative_ess(cap_and_redistribute(w, theta)) for theta in thetas]
        assert all(a >= b - 1e-12 for a, b in zip(ess, ess[1:]))


class TestSearch:
    def test_reaches_target_within_alpha(self, rng):
        w = SampleWeights.normalized(rng.exponential(size=200) ** 4)
        cfg = EssConfig(eta=0.5, alpha=0.01)
        assert w.relative_ess < cfg.eta
        out = search_threshold(w, cfg)
        assert abs(out.relative_ess - 0.5) <= 0.01

    def test_one_dominant_weight(self):
        w = SampleWeights(np.array([0.91] + [0.01] * 9))
        assert w.relative_ess == pytest.approx(0.1206, abs=1e-4)
        out = search_threshold(w, EssConfig(eta=0.5, alpha=0.01))
        assert 0.49 <= out.relative_ess <= 0.51
        # relative ESS 0.5 is reached at cap 0.4 with the rest spread evenly
        assert out.values[0] == pytest.approx(0.4, abs=0.02)
        assert_allclose(out.values[1:], out.values[1])

    def test_weights_already_above_eta_are_kept(self):
        w = SampleWeights.normalized([1.0, 1.1, 0.9, 1.0])
        assert search_threshold(w, EssConfig(eta=0.5, alpha=0.01)) is w

    def test_eta_one_is_uniform(self):
        out = search_threshold(SampleWeights.normalized([5.0, 1.0, 1.0]), EssConfig(eta=1.0))
        assert_allclose(out.values, np.full(3, 1 / 3))

    def test_exhausted_bisection_reports_best_iterate(self, monkeypatch):
        monkeypatch.setattr("src.weights.MAX_BISECTION_STEPS", 1)
        w = SampleWeights.normalized([1000.0, 1.0])
        with pytest.raises(SearchNotConvergedError) as info:
            search_threshold(w, EssConfig(eta=0.9999, alpha=0.01))
        assert isinstance(info.value.best, SampleWeights)
        assert info.value.gap > 0.01


class TestFromPropensities:
    def test_inverse_propensities(self):
        out = weights_from_propensities([1.0, 2.0, 4.0], EssConfig(eta=0.0))
        assert_allclose(out.values, np.array([4, 2, 1]) / 7)

    def test_eta_one_is_uniform_whatever_the_scores(self):
        out = weights_from_propensities([0.01, 5.0, 1.0], EssConfig(eta=1.0))
        assert_allclose(out.values, np.full(3, 1 / 3))

    @pytest.mark.parametrize("scores", [[1.0, 0.0], [1.0, -1.0], [1.0, np.nan], [1.0, np.inf], []])
    def test_invalid_scores(self, scores):
        with pytest.raises(InvalidPropensityError):
            weights_from_propensities(scores, EssConfig())

    def test_meets_eta_when_adjusted(self, rng):
        scores = rng.exponential(size=500) ** 3 + 1e-3
        cfg = EssConfig(eta=0.4, alpha=0.01)
        out = weights_from_propensities(scores, cfg)
        assert out.relative_ess >= 0.4 - 0.01

    def test_one_rare_observation_is_pulled_towards_uniform(self):
        out = weights_from_propensities([100.0, 1.0, 1.0, 1.0], EssConfig(eta=0.9, alpha=0.01))
        assert 0.89 <= out.relative_ess <= 0.91
        assert_allclose(out.values[1:], out.values[1])
        assert out.values[0] < out.values[1]
