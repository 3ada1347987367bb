"""Synthetic data: correlation families, discrete joint distributions, regression functions and oracles."""

from src.datagen.correlation import (
    CorrelationSpec,
    build_gd_sigma,
    example_sigma,
    rf_sigma,
    sample_mvn,
    tradeoff_sigma,
)
from src.datagen.generators import DesignConfig, SyntheticDesign, build_design
from src.datagen.joint import (
    JointDistribution,
    centered_binomial,
    sample_discrete,
    solve_discrete_joint,
    two_binary_table,
)
from src.datagen.oracles import (
    marginal_functions,
    population_losaw_weights,
    product_measure,
    reweighted_distribution,
    is_signal_feature,
)
from src.datagen.regression import RegressionSpec, add_noise, eval_regression

__all__ = [
    "CorrelationSpec",
    "DesignConfig",
    "JointDistribution",
    "RegressionSpec",
    "SyntheticDesign",
    "add_noise",
    "build_design",
    "build_gd_sigma",
    "centered_binomial",
    "eval_regression",
    "example_sigma",
    "is_signal_feature",
    "marginal_functions",
    "population_losaw_weights",
    "product_measure",
    "reweighted_distribution",
    "rf_sigma",
    "sample_discrete",
    "sample_mvn",
    "solve_discrete_joint",
    "tradeoff_sigma",
    "two_binary_table",
]
