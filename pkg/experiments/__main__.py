"""
Experiment CLI Entry Point.
`python -m experiments <command>`: generate datasets, fit single models,
run Monte-Carlo evaluations, eta sweeps and table reproductions, and run
the selfcheck battery. Logs go to stderr; stdout lists written artifacts.
"""

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

# Add project root to path
current_dir = os.path.dirname(os.path.abspath(__file__))
project_root = os.path.join(current_dir, "..")
sys.path.insert(0, project_root)

import numpy as np
import pandas as pd
import structlog
from pydantic import ValidationError

from experiments.config import ExperimentConfig, format_validation_error, resolve_config
from experiments.reproduce import reproduce_table
from experiments.runner import draw_run_data, eta_sweep, run_experiment
from experiments.selfcheck import run_selfcheck
from src.config import get_settings
from src.datagen.io import load_dataset, save_dataset
from src.errors import LosawError
from src.forest.ensemble import fit_forest, mdi_importance
from src.forest.serialization import save_forest
from src.log_setup import configure_logging
from src.losawgd.checkpoint import save_network, write_trace
from src.losawgd.trainer import gd_importance, init_network, train_losawgd, train_standard
from src.rng import derive_seed

logger = structlog.get_logger()

RESULT_SCHEMA = "losaw-result-v1"
FLOAT_FORMAT = "%.17g"


# ─────────────────────────────────────────────────────────────────
# Argument parsing
# ─────────────────────────────────────────────────────────────────

def _float_list(text: str) -> list[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")


def _name_list(text: str) -> list[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Experiment document (JSON or YAML)")
    parser.add_argument("--seed", type=int, help="Top-level seed")
    parser.add_argument("--out", help="Output directory (default: <output_dir>/<command>)")
    parser.add_argument("--workers", type=int, help="Process pool size for Monte-Carlo runs")
    parser.add_argument("--log-level", help="Log level (default from LOSAW_LOG_LEVEL)")

    design = parser.add_argument_group("design")
    design.add_argument("--design", choices=["example", "tradeoff", "rf-study", "gd-study"])
    design.add_argument("--data-kind", choices=["continuous", "discrete"])
    design.add_argument("--p", type=int, help="Number of features")
    design.add_argument("--regression", type=int, help="Regression model id (1-10)")
    design.add_argument("--phi", type=float, help="Noise-to-signal ratio")

    experiment = parser.add_argument_group("experiment")
    experiment.add_argument("--n", type=int, help="Training sample size")
    experiment.add_argument("--n-test", type=int)
    experiment.add_argument("--n-independent", type=int)
    experiment.add_argument("--runs", type=int, help="Monte-Carlo runs")
    experiment.add_argument("--algorithms", type=_name_list, help="Comma-separated: rf,losaw-rf,gd,losaw-gd")
    experiment.add_argument("--eta", type=float, help="Minimum relative ESS of the losaw arms")
    experiment.add_argument("--alpha", type=float, help="ESS search tolerance")

    forest = parser.add_argument_group("forest")
    forest.add_argument("--n-tree", type=int)
    forest.add_argument("--max-depth", type=int)
    forest.add_argument("--min-leaf", type=int)
    forest.add_argument("--m-try", type=int)
    forest.add_argument("--q-max", type=int)

    gd = parser.add_argument_group("gradient descent")
    gd.add_argument("--steps", type=int)
    gd.add_argument("--batch-size", type=int)
    gd.add_argument("--learning-rate", type=float)


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="experiments", description="Local sample weighting experiments.")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", help="Write the train / test / independent datasets of run 0")
    _common(gen)

    fit_rf = commands.add_parser("fit-rf", help="Fit one forest on a dataset file")
    _common(fit_rf)
    fit_rf.add_argument("--data", required=True, help="Training CSV written by `gen`")
    fit_rf.add_argument("--algorithm", choices=["rf", "losaw-rf"], default="losaw-rf")

    fit_gd = commands.add_parser("fit-gd", help="Train one network on a dataset file")
    _common(fit_gd)
    fit_gd.add_argument("--data", required=True, help="Training CSV written by `gen`")
    fit_gd.add_argument("--eval-data", help="Dataset the importance is computed on (default: --data)")
    fit_gd.add_argument("--algorithm", choices=["gd", "losaw-gd"], default="losaw-gd")

    evaluate = commands.add_parser("eval", help="Monte-Carlo evaluation of the configured algorithms")
    _common(evaluate)

    sweep = commands.add_parser("sweep-eta", help="Prediction and interpretation across an eta grid")
    _common(sweep)
    sweep.add_argument("--etas", type=_float_list, default=[0.05, 0.2, 0.5, 0.8])

    reproduce = commands.add_parser("reproduce", help="Compare against a published results table")
    _common(reproduce)
    reproduce.add_argument("--table", type=int, required=True)
    reproduce.add_argument("--scale", type=float, default=0.08, help="Fraction of the published run count")
    reproduce.add_argument("--n-scale", type=float, default=1.0, help="Fraction of the published sample size")

    selfcheck = commands.add_parser("selfcheck", help="Run the in-process oracle battery")
    selfcheck.add_argument("--log-level")

    return parser.parse_args(argv)


def _set(document: dict[str, Any], path: Sequence[str], value: Any) -> None:
    if value is None:
        return
    node = document
    for key in path[:-1]:
        node = node.setdefault(key, {})
    node[path[-1]] = value


def build_overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Nested config overrides from the flags that were actually given."""
    overrides: dict[str, Any] = {}
    mapping = {
        "seed": ("seed",),
        "design": ("design", "design"),
        "data_kind": ("design", "data_kind"),
        "p": ("design", "p"),
        "regression": ("design", "regression"),
        "phi": ("design", "phi"),
        "n": ("n",),
        "n_test": ("n_test",),
        "n_independent": ("n_independent",),
        "runs": ("runs",),
        "algorithms": ("algorithms",),
        "eta": ("eta",),
        "alpha": ("alpha",),
        "n_tree": ("forest", "n_tree"),
        "max_depth": ("forest", "max_depth"),
        "min_leaf": ("forest", "min_leaf"),
        "m_try": ("forest", "m_try"),
        "q_max": ("forest", "q_max"),
        "steps": ("gd", "steps"),
        "batch_size": ("gd", "batch_size"),
        "learning_rate": ("gd", "learning_rate"),
    }
    for attribute, path in mapping.items():
        _set(overrides, path, getattr(args, attribute, None))
    # reproduce filters shadow the design flags of the same name
    if args.command == "reproduce":
        overrides.pop("design", None)
        overrides.pop("n", None)
    return overrides


# ─────────────────────────────────────────────────────────────────
# Output helpers
# ─────────────────────────────────────────────────────────────────

def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out) if args.out else Path(get_settings().output_dir) / args.command
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def write_json(payload: dict[str, Any], path: Path) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def write_resolved_config(cfg: ExperimentConfig, out: Path) -> Path:
    return write_json(cfg.model_dump(mode="json"), out / "resolved_config.json")


def importance_frame(fi: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame({"feature": [f"x{j + 1}" for j in range(len(fi))], "importance": fi})


def _announce(paths: Sequence[Path]) -> None:
    for path in paths:
        print(path)


# ─────────────────────────────────────────────────────────────────
# Commands
# ─────────────────────────────────────────────────────────────────

def cmd_gen(args, cfg: ExperimentConfig) -> list[Path]:
    out = _out_dir(args)
    data = draw_run_data(cfg, derive_seed(cfg.seed, "run", 0))
    meta = {"design": cfg.design.model_dump(mode="json"), "seed": cfg.seed, "run": 0, "signal": list(data.signal)}
    paths = [
        save_dataset(data.train, out / "train.csv", {**meta, "split": "train"}),
        save_dataset(data.test, out / "test.csv", {**meta, "split": "test"}),
        save_dataset(data.independent, out / "independent.csv", {**meta, "split": "independent"}),
        write_resolved_config(cfg, out),
    ]
    return paths


def cmd_fit_rf(args, cfg: ExperimentConfig) -> list[Path]:
    out = _out_dir(args)
    data, _ = load_dataset(args.data)
    forest = fit_forest(data, cfg.forest_config(args.algorithm), derive_seed(cfg.seed, "forest"))
    return [
        save_forest(forest, out / "forest.json"),
        write_csv(importance_frame(mdi_importance(forest)), out / "importance.csv"),
        write_resolved_config(cfg, out),
    ]


def cmd_fit_gd(args, cfg: ExperimentConfig) -> list[Path]:
    out = _out_dir(args)
    data, _ = load_dataset(args.data)
    evaluation = load_dataset(args.eval_data)[0] if args.eval_data else data
    evaluation.check_schema(data.kinds)

    gd_cfg = cfg.gd_config(derive_seed(cfg.seed, "gd"))
    net = init_network(data.p, gd_cfg)
    paths = []
    if args.algorithm == "losaw-gd":
        net, trace = train_losawgd(data, net, gd_cfg)
        paths.append(write_trace(trace, out / "trace.csv"))
    else:
        net = train_standard(data, net, gd_cfg)
    paths.append(save_network(net, out / "network.json"))
    fi = gd_importance(net, evaluation, gd_cfg.saliency_mode)
    paths.append(write_csv(importance_frame(fi), out / "importance.csv"))
    paths.append(write_resolved_config(cfg, out))
    return paths


def cmd_eval(args, cfg: ExperimentConfig) -> list[Path]:
    out = _out_dir(args)
    result = run_experiment(cfg, _workers(args))
    frame = result.results_frame()
    payload = {
        "schema": RESULT_SCHEMA,
        "config": cfg.model_dump(mode="json"),
        "summary": result.summary(),
        "runs": frame.to_dict(orient="records"),
    }
    return [
        write_csv(frame, out / "results.csv"),
        write_csv(result.importances_frame(), out / "importances.csv"),
        write_csv(result.importance_summary(), out / "importance_summary.csv"),
        write_csv(result.timings_frame(), out / "timings.csv"),
        write_json(payload, out / "results.json"),
        write_resolved_config(cfg, out),
    ]


def cmd_sweep_eta(args, cfg: ExperimentConfig) -> list[Path]:
    out = _out_dir(args)
    if not args.etas or any(not 0.0 < eta <= 1.0 for eta in args.etas):
        raise ValueError("every eta of the grid must lie in (0, 1]")
    frame = eta_sweep(cfg, args.etas, _workers(args))
    return [write_csv(frame, out / "sweep.csv"), write_resolved_config(cfg, out)]


def cmd_reproduce(args, cfg: ExperimentConfig) -> list[Path]:
    out = _out_dir(args)
    frame = reproduce_table(
        args.table,
        args.scale,
        cfg,
        regression=args.regression,
        n=args.n,
        phi=args.phi,
        n_scale=args.n_scale,
        workers=_workers(args),
    )
    return [write_csv(frame, out / "comparison.csv"), write_resolved_config(cfg, out)]


def cmd_selfcheck() -> int:
    results = run_selfcheck()
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {status}  {r.detail}".rstrip())
    return 0 if all(r.passed for r in results) else 3


COMMANDS = {
    "gen": cmd_gen,
    "fit-rf": cmd_fit_rf,
    "fit-gd": cmd_fit_gd,
    "eval": cmd_eval,
    "sweep-eta": cmd_sweep_eta,
    "reproduce": cmd_reproduce,
}


def _workers(args) -> int:
    return args.workers if args.workers is not None else get_settings().workers


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse, dispatch and map failures to exit codes (2 validation, 3 numerical)."""
    args = parse_args(argv)
    settings = get_settings()
    configure_logging(args.log_level or settings.log_level, settings.log_json)

    try:
        if args.command == "selfcheck":
            return cmd_selfcheck()
        cfg, _ = resolve_config(args.config, build_overrides(args), settings.defaults_path)
        if args.workers is not None and args.workers < 1:
            raise ValueError("workers must be >= 1")
        logger.info("command_started", command=args.command, seed=cfg.seed)
        _announce(COMMANDS[args.command](args, cfg))
        return 0
    except ValidationError as e:
        print(f"invalid configuration:\n{format_validation_error(e)}", file=sys.stderr)
        return 2
    except LosawError as e:
        logger.error("command_failed", command=args.command, error=str(e), error_type=type(e).__name__)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except (ValueError, FileNotFoundError) as e:
        logger.error("command_failed", command=args.command, error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ArithmeticError as e:
        logger.error("command_failed", command=args.command, error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
