"""
Monte-Carlo runner.
Every run draws its own training, test and independent-features datasets
from named substreams of a per-run seed, fits each configured algorithm on
the same data and evaluates it.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
import pandas as pd
import structlog

from experiments.config import GD_ALGORITHMS, ExperimentConfig
from src.datagen.generators import SyntheticDesign, build_design
from src.dataset import Dataset
from src.errors import NoSplitsError
from src.forest.ensemble import fit_forest, mdi_importance
from src.losawgd.trainer import gd_importance, init_network, train_losawgd, train_standard
from src.metrics import EvalReport, evaluate
from src.rng import derive_seed, substream

logger = structlog.get_logger()

RESULT_COLUMNS = ["run", "algorithm", "r2_test", "r2_ind", "pr_auc", "fi_gap"]
SWEEP_COLUMNS = [
    "eta",
    "algorithm",
    "runs",
    "r2_test_mean",
    "r2_test_lo",
    "r2_test_hi",
    "pr_auc_mean",
    "pr_auc_lo",
    "pr_auc_hi",
]
# 95% coverage band
BAND = (0.025, 0.975)


@dataclass(frozen=True)
class RunData:
    train: Dataset
    test: Dataset
    independent: Dataset
    signal: tuple[int, ...]


@dataclass(frozen=True)
class RunResult:
    run: int
    algorithm: str
    report: EvalReport
    seconds: float
    diagnostics: dict[str, Any] = field(default_factory=dict)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: list[RunResult]

    @property
    def p(self) -> int:
        return len(self.runs[0].report.importance)

    def results_frame(self) -> pd.DataFrame:
        rows = [{"run": r.run, "algorithm": r.algorithm, **r.report.metrics()} for r in self.runs]
        return pd.DataFrame(rows, columns=RESULT_COLUMNS)

    def importances_frame(self) -> pd.DataFrame:
        columns = ["run", "algorithm"] + [f"x{j + 1}" for j in range(self.p)]
        rows = [[r.run, r.algorithm, *r.report.importance] for r in self.runs]
        return pd.DataFrame(rows, columns=columns)

    def importance_summary(self) -> pd.DataFrame:
        """Mean and standard deviation of every feature's importance, per algorithm."""
        frame = self.importances_frame().drop(columns="run")
        long = frame.melt(id_vars="algorithm", var_name="feature", value_name="importance")
        summary = long.groupby(["algorithm", "feature"], sort=False)["importance"].agg(["mean", "std"])
        return summary.reset_index().fillna({"std": 0.0})

    def timings_frame(self) -> pd.DataFrame:
        rows = [{"run": r.run, "algorithm": r.algorithm, "seconds": r.seconds} for r in self.runs]
        return pd.DataFrame(rows, columns=["run", "algorithm", "seconds"])

    def summary(self) -> dict[str, dict[str, float]]:
        grouped = self.results_frame().drop(columns="run").groupby("algorithm", sort=False)
        means = grouped.mean()
        return {algorithm: {k: float(v) for k, v in row.items()} for algorithm, row in means.iterrows()}


def draw_run_data(cfg: ExperimentConfig, run_seed: int) -> RunData:
    design: SyntheticDesign = build_design(cfg.design, run_seed)
    return RunData(
        train=design.dataset(cfg.n, substream(run_seed, "data")),
        test=design.dataset(cfg.n_test, substream(run_seed, "test")),
        independent=design.independent_dataset(cfg.n_independent, substream(run_seed, "independent")),
        signal=design.signal,
    )


def _forest_arm(cfg: ExperimentConfig, algorithm: str, data: RunData, run_seed: int):
    forest = fit_forest(data.train, cfg.forest_config(algorithm), derive_seed(run_seed, "forest"))
    try:
        fi = mdi_importance(forest)
    except NoSplitsError:
        logger.warning("forest_without_splits", algorithm=algorithm)
        fi = np.zeros(data.train.p)
    return forest.predict_many, fi, {"ess_mean": forest.ess_summary()["mean"]}


def _gd_arm(cfg: ExperimentConfig, algorithm: str, data: RunData, run_seed: int):
    gd_cfg = cfg.gd_config(derive_seed(run_seed, "gd"))
    net = init_network(data.train.p, gd_cfg)
    if algorithm == "losaw-gd":
        net, trace = train_losawgd(data.train, net, gd_cfg)
        diagnostics = {"batch_ess_mean": float(np.mean([row.batch_ess for row in trace])) if trace else float("nan")}
    else:
        net, diagnostics = train_standard(data.train, net, gd_cfg), {}
    fi = gd_importance(net, data.test, gd_cfg.saliency_mode)
    return net, fi, diagnostics


def run_once(cfg: ExperimentConfig, run: int) -> list[RunResult]:
    """All algorithms of `cfg` on the datasets of Monte-Carlo run `run`."""
    run_seed = derive_seed(cfg.seed, "run", run)
    data = draw_run_data(cfg, run_seed)
    results = []
    for algorithm in cfg.algorithms:
        started = time.perf_counter()
        arm = _gd_arm if algorithm in GD_ALGORITHMS else _forest_arm
        model, fi, diagnostics = arm(cfg, algorithm, data, run_seed)
        seconds = time.perf_counter() - started
        report = evaluate(
            data.test.y,
            model(data.test.x),
            data.independent.y,
            model(data.independent.x),
            fi,
            data.signal,
        )
        results.append(RunResult(run, algorithm, report, seconds, diagnostics))
        logger.debug("run_evaluated", run=run, algorithm=algorithm, pr_auc=report.pr_auc, r2_test=report.r2_test)
    return results


def _run_star(args) -> list[RunResult]:
    return run_once(*args)


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """`cfg.runs` independent runs; results are ordered by run index whatever the pool order."""
    jobs = [(cfg, run) for run in range(cfg.runs)]
    if workers > 1 and cfg.runs > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_run_star, jobs))
    else:
        batches = [_run_star(job) for job in jobs]
    runs = sorted((r for batch in batches for r in batch), key=lambda r: (r.run, cfg.algorithms.index(r.algorithm)))
    logger.info("experiment_finished", runs=cfg.runs, algorithms=list(cfg.algorithms), design=cfg.design.design)
    return ExperimentResult(cfg, runs)


def _band_row(eta: float, algorithm: str, frame: pd.DataFrame) -> dict[str, Any]:
    row: dict[str, Any] = {"eta": eta, "algorithm": algorithm, "runs": int(len(frame))}
    for metric in ("r2_test", "pr_auc"):
        values = frame[metric].to_numpy()
        row[f"{metric}_mean"] = float(values.mean())
        row[f"{metric}_lo"] = float(np.quantile(values, BAND[0]))
        row[f"{metric}_hi"] = float(np.quantile(values, BAND[1]))
    return row


def eta_sweep(cfg: ExperimentConfig, eta_grid: Sequence[float], workers: int = 1) -> pd.DataFrame:
    """
    Mean R^2_test and pr-AUC with 95% bands per eta. Baseline arms do not
    depend on eta: they run once and are repeated on every grid row.
    Runs are paired across the grid through the shared seed.
    """
    baselines = tuple(a for a in cfg.algorithms if not a.startswith("losaw-"))
    losaw = tuple(a for a in cfg.algorithms if a.startswith("losaw-"))
    baseline_frame: Optional[pd.DataFrame] = None
    if baselines:
        base_cfg = ExperimentConfig.model_validate({**cfg.model_dump(), "algorithms": baselines})
        baseline_frame = run_experiment(base_cfg, workers).results_frame()

    rows = []
    for eta in eta_grid:
        if losaw:
            eta_cfg = ExperimentConfig.model_validate({**cfg.with_eta(eta).model_dump(), "algorithms": losaw})
            frame = run_experiment(eta_cfg, workers).results_frame()
            rows.extend(_band_row(eta, a, frame[frame["algorithm"] == a]) for a in losaw)
        if baseline_frame is not None:
            rows.extend(_band_row(eta, a, baseline_frame[baseline_frame["algorithm"] == a]) for a in baselines)
        logger.info("eta_swept", eta=eta)
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)
