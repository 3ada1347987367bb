"""Shared fixtures."""

from pathlib import Path

import numpy as np
import pytest
import structlog

from src.dataset import Dataset, FeatureKind

FIXTURES = Path(__file__).parent / "fixtures"
REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture(autouse=True)
def _restore_structlog_config():
    """CLI tests configure structlog against pytest's captured stderr, which is
    closed after the test; restore the previous configuration afterwards."""
    saved = structlog.get_config()
    yield
    structlog.configure(**saved)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def continuous_data(rng) -> Dataset:
    """Three correlated Gaussian features, y = x1 + x2 + small noise."""
    n = 300
    z = rng.standard_normal((n, 3))
    x = np.column_stack([z[:, 0], 0.8 * z[:, 0] + 0.6 * z[:, 1], z[:, 2]])
    y = x[:, 0] + x[:, 1] + 0.1 * rng.standard_normal(n)
    return Dataset(x, y)


@pytest.fixture
def discrete_data(rng) -> Dataset:
    """Three ternary features, the second a noisy copy of the first; y depends on the first only."""
    n = 400
    levels = (-1.0, 0.0, 1.0)
    first = rng.choice(levels, size=n, p=[0.25, 0.5, 0.25])
    copy = np.where(rng.random(n) < 0.8, first, rng.choice(levels, size=n, p=[0.25, 0.5, 0.25]))
    third = rng.choice(levels, size=n, p=[0.25, 0.5, 0.25])
    x = np.column_stack([first, copy, third])
    y = 2.0 * first + 0.1 * rng.standard_normal(n)
    return Dataset(x, y, tuple(FeatureKind.discrete(levels) for _ in range(3)))


@pytest.fixture
def in_repo_root(monkeypatch):
    """Run with the repository root as working directory, so config.yaml is found."""
    monkeypatch.chdir(REPO_ROOT)
    return REPO_ROOT
