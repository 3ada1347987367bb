import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError
from scipy.stats import chisquare

from src.dataset import Dataset
from src.errors import SchemaMismatchError
from src.losawgd import trainer
from src.losawgd.checkpoint import (
    load_network,
    network_from_dict,
    network_to_dict,
    read_trace,
    save_network,
    write_trace,
)
from src.losawgd.network import DenseNet, forward
from src.losawgd.trainer import GdConfig, init_network, saliency, train_losawgd, train_standard
from src.weights import SampleWeights

FAST = dict(steps=30, batch_size=32, learning_rate=0.01, hidden=(8,))


def _linear(weights) -> DenseNet:
    return DenseNet([np.array(weights, dtype=float).reshape(-1, 1)], [np.zeros(1)])


class TestGdConfig:
    def test_defaults(self):
        cfg = GdConfig()
        assert (cfg.steps, cfg.batch_size, cfg.learning_rate, cfg.eta) == (400, 254, 0.001, 0.2)
        assert cfg.hidden == (64, 32)

    @pytest.mark.parametrize("fields", [dict(hidden=(8, 0)), dict(eta=1.5), dict(batch_size=0), dict(depth=3)])
    def test_rejects(self, fields):
        with pytest.raises(ValidationError):
            GdConfig(**fields)


class TestSaliency:
    def test_clamp(self):
        x = np.zeros((4, 3))
        # |w| clamped to [1, 0.5, 0.25]
        assert_allclose(saliency(_linear([2.0, 0.5, -0.25]), x, "clamp"), np.array([1.0, 0.5, 0.25]) / 1.75)

    def test_minmax(self):
        x = np.zeros((4, 3))
        assert_allclose(saliency(_linear([2.0, 0.5, -0.25]), x, "minmax"), [0.875, 0.125, 0.0])

    def test_flat_map_is_uniform(self):
        assert_allclose(saliency(_linear([0.0, 0.0]), np.zeros((2, 2))), [0.5, 0.5])
        assert_allclose(saliency(_linear([1.0, 1.0]), np.zeros((2, 2)), "minmax"), [0.5, 0.5])

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            saliency(_linear([1.0]), np.zeros((1, 1)), "rank")


class TestTrainers:
    def test_standard_training_fits(self, continuous_data):
        cfg = GdConfig(steps=300, batch_size=32, learning_rate=0.01, hidden=(16,), seed=1)
        start = init_network(continuous_data.p, cfg)
        trained = train_standard(continuous_data, start, cfg)
        before = np.mean((forward(start, continuous_data.x) - continuous_data.y) ** 2)
        after = np.mean((forward(trained, continuous_data.x) - continuous_data.y) ** 2)
        assert after < 0.5 * before

    def test_training_leaves_the_start_untouched(self, continuous_data):
        cfg = GdConfig(seed=1, **FAST)
        start = init_network(continuous_data.p, cfg)
        snapshot = start.copy()
        train_standard(continuous_data, start, cfg)
        train_losawgd(continuous_data, start, cfg)
        assert all(np.array_equal(a, b) for a, b in zip(start.parameters(), snapshot.parameters()))

    def test_losaw_training_is_deterministic(self, continuous_data):
        cfg = GdConfig(seed=2, eta=0.3, **FAST)
        start = init_network(continuous_data.p, cfg)
        first, first_trace = train_losawgd(continuous_data, start, cfg)
        second, second_trace = train_losawgd(continuous_data, start, cfg)
        assert first_trace == second_trace
        assert all(np.array_equal(a, b) for a, b in zip(first.parameters(), second.parameters()))

    def test_trace(self, continuous_data):
        cfg = GdConfig(seed=2, eta=0.3, **FAST)
        _, trace = train_losawgd(continuous_data, init_network(continuous_data.p, cfg), cfg)
        assert [row.step for row in trace] == list(range(30))
        assert all(0 <= row.feature < continuous_data.p for row in trace)
        assert all(row.batch_ess >= (0.3 - 0.01) * continuous_data.n - 1e-6 for row in trace)

    def test_eta_one_samples_uniformly(self, continuous_data):
        cfg = GdConfig(seed=2, eta=1.0, **FAST)
        _, trace = train_losawgd(continuous_data, init_network(continuous_data.p, cfg), cfg)
        assert all(row.batch_ess == pytest.approx(continuous_data.n) for row in trace)

    def test_zero_steps(self, continuous_data):
        cfg = GdConfig(steps=0, hidden=(4,))
        start = init_network(continuous_data.p, cfg)
        net, trace = train_losawgd(continuous_data, start, cfg)
        assert trace == []
        assert all(np.array_equal(a, b) for a, b in zip(net.parameters(), start.parameters()))

    def test_batches_follow_the_feature_weights(self, monkeypatch):
        x = np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 1.0], [3.0, 0.0]])
        data = Dataset(x, x[:, 0] + x[:, 1])
        target = SampleWeights(np.array([0.5, 0.25, 0.125, 0.125]))
        monkeypatch.setattr(trainer._FeatureWeights, "__call__", lambda self, feature: target)
        drawn = []
        original = trainer.backward

        def recording_backward(net, xb, yb):
            drawn.extend(xb[:, 0].astype(int))
            return original(net, xb, yb)

        monkeypatch.setattr(trainer, "backward", recording_backward)
        cfg = GdConfig(steps=400, batch_size=250, hidden=(4,), eta=0.5, seed=3)
        train_losawgd(data, init_network(2, cfg), cfg)
        counts = np.bincount(drawn, minlength=4)
        assert chisquare(counts, target.values * counts.sum()).pvalue > 0.001


class TestCheckpoint:
    def test_network_round_trip(self, tmp_path, rng):
        net = DenseNet.initialize(4, (6, 3), rng)
        loaded = load_network(save_network(net, tmp_path / "network.json"))
        x = rng.standard_normal((5, 4))
        assert np.array_equal(forward(loaded, x), forward(net, x))

    def test_schema(self, rng):
        payload = network_to_dict(DenseNet.initialize(2, (3,), rng))
        with pytest.raises(SchemaMismatchError):
            network_from_dict({**payload, "schema": "other"})
        with pytest.raises(SchemaMismatchError):
            network_from_dict({**payload, "sizes": [2, 4, 1]})

    def test_trace_round_trip(self, tmp_path):
        rows = [trainer.TraceRow(step=0, feature=3, batch_ess=120.5, loss=0.1), trainer.TraceRow(1, 0, 99.25, 1 / 3)]
        path = write_trace(rows, tmp_path / "trace.csv")
        assert path.read_text().splitlines()[0] == "step,feature,batch_ess,loss"
        assert read_trace(path) == rows
