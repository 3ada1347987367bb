import numpy as np
import pandas as pd
import pytest
from pandas.testing import assert_frame_equal

from experiments.config import ExperimentConfig
from experiments.runner import RESULT_COLUMNS, SWEEP_COLUMNS, draw_run_data, eta_sweep, run_experiment, run_once
from src.rng import derive_seed


def _small(**fields) -> ExperimentConfig:
    document = dict(
        seed=11,
        n=120,
        n_test=100,
        n_independent=100,
        runs=2,
        design=dict(p=6, regression=3),
        forest=dict(n_tree=5, max_depth=4),
        gd=dict(steps=5, batch_size=16, hidden=(4,)),
    )
    document.update(fields)
    return ExperimentConfig.model_validate(document)


class TestRunData:
    def test_sizes(self):
        cfg = _small()
        data = draw_run_data(cfg, derive_seed(cfg.seed, "run", 0))
        assert (data.train.n, data.test.n, data.independent.n) == (120, 100, 100)
        assert data.signal == (0, 1)

    def test_runs_draw_different_data(self):
        cfg = _small()
        first = draw_run_data(cfg, derive_seed(cfg.seed, "run", 0))
        second = draw_run_data(cfg, derive_seed(cfg.seed, "run", 1))
        assert not np.array_equal(first.train.x, second.train.x)


class TestRunExperiment:
    def test_results_are_ordered_by_run_then_algorithm(self):
        result = run_experiment(_small())
        frame = result.results_frame()
        assert list(frame.columns) == RESULT_COLUMNS
        assert list(frame["run"]) == [0, 0, 1, 1]
        assert list(frame["algorithm"]) == ["rf", "losaw-rf", "rf", "losaw-rf"]
        assert frame["pr_auc"].between(0, 1).all()

    def test_same_seed_same_results(self):
        first = run_experiment(_small()).results_frame()
        second = run_experiment(_small()).results_frame()
        assert_frame_equal(first, second)

    def test_workers_do_not_change_results(self):
        serial = run_experiment(_small()).results_frame()
        pooled = run_experiment(_small(), workers=2).results_frame()
        assert_frame_equal(serial, pooled)

    def test_algorithms_share_a_run_dataset(self):
        # the baseline arm does not depend on what runs next to it
        alone = run_once(_small(algorithms=("rf",)), 0)[0].report
        paired = run_once(_small(), 0)[0].report
        assert alone == paired

    def test_gradient_descent_arms(self):
        result = run_experiment(_small(algorithms=("gd", "losaw-gd"), runs=1))
        assert [r.algorithm for r in result.runs] == ["gd", "losaw-gd"]
        assert "batch_ess_mean" in result.runs[1].diagnostics
        assert sum(result.runs[0].report.importance) == pytest.approx(1.0)

    def test_frames(self):
        result = run_experiment(_small())
        importances = result.importances_frame()
        assert list(importances.columns) == ["run", "algorithm"] + [f"x{j}" for j in range(1, 7)]
        summary = result.importance_summary()
        assert len(summary) == 2 * 6
        assert list(summary.columns) == ["algorithm", "feature", "mean", "std"]
        assert list(result.timings_frame().columns) == ["run", "algorithm", "seconds"]
        assert set(result.summary()) == {"rf", "losaw-rf"}
        assert set(result.summary()["rf"]) == {"r2_test", "r2_ind", "pr_auc", "fi_gap"}


class TestEtaSweep:
    def test_grid(self, fixtures_dir):
        frame = eta_sweep(_small(), [0.2, 0.8])
        header = pd.read_csv(fixtures_dir / "sweep_header.csv").columns.tolist()
        assert list(frame.columns) == header == SWEEP_COLUMNS
        assert len(frame) == 4
        assert set(frame["runs"]) == {2}
        for metric in ("r2_test", "pr_auc"):
            assert (frame[f"{metric}_lo"] <= frame[f"{metric}_mean"] + 1e-12).all()
            assert (frame[f"{metric}_mean"] <= frame[f"{metric}_hi"] + 1e-12).all()

    def test_baseline_rows_repeat(self):
        frame = eta_sweep(_small(), [0.2, 0.8])
        baseline = frame[frame["algorithm"] == "rf"].drop(columns="eta").reset_index(drop=True)
        assert_frame_equal(baseline.iloc[[0]], baseline.iloc[[1]].reset_index(drop=True))

    def test_losaw_rows_use_the_grid_eta(self):
        frame = eta_sweep(_small(algorithms=("losaw-rf",)), [0.3])
        assert frame["eta"].tolist() == [0.3]
        assert frame["algorithm"].tolist() == ["losaw-rf"]
