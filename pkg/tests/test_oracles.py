import numpy as np
from numpy.testing import assert_allclose

from src.datagen.joint import JointDistribution, two_binary_table
from src.datagen.oracles import (
    is_signal_feature,
    marginal_functions,
    population_losaw_weights,
    product_measure,
    reweighted_distribution,
)
from src.datagen.regression import binary_effect_example, first_feature


def test_product_measure():
    assert_allclose(product_measure(two_binary_table()), 0.25)
    assert_allclose(product_measure(two_binary_table(), 0), 0.25)


def test_population_weights_remove_the_dependence():
    joint = two_binary_table()
    assert_allclose(population_losaw_weights(joint, 0), [0.625, 2.5, 2.5, 0.625])
    assert_allclose(reweighted_distribution(joint, 0), product_measure(joint, 0))


def test_zero_probability_atoms_get_zero_weight():
    joint = two_binary_table(0.5)
    weights = population_losaw_weights(joint, 1)
    assert_allclose(weights, [0.5, 0.0, 0.0, 0.5])


def test_association_and_effect_of_a_proxy():
    # x2 only tracks x1, so it has an association with f but no effect
    result = marginal_functions(two_binary_table(), first_feature, 1)
    assert_allclose(result.association, [0.2, 0.8])
    assert_allclose(result.effect, [0.5, 0.5])


def test_effect_of_a_signal_feature():
    result = marginal_functions(two_binary_table(), binary_effect_example, 1)
    assert_allclose(result.effect, [2.5, -0.5])
    # association mixes in the correlated x1: 5 * 0.2 and 5 * 0.8 - 3
    assert_allclose(result.association, [1.0, 1.0])


def test_signal_feature_check():
    joint = two_binary_table()
    assert is_signal_feature(first_feature, joint, 0)
    assert not is_signal_feature(first_feature, joint, 1)
    assert is_signal_feature(binary_effect_example, joint, 1)


def test_signal_check_ignores_unsupported_levels():
    levels = (np.array([0.0, 1.0]), np.array([0.0, 1.0]))
    joint = JointDistribution(levels, np.array([0.5, 0.0, 0.5, 0.0]))
    # x2 never takes the value 1, so f cannot move with it
    assert not is_signal_feature(binary_effect_example, joint, 1)
