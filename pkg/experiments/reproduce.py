"""
Table reproduction.
Re-runs slices of the published random-forest result tables at reduced
Monte-Carlo counts and reports the gap to the published averages.
"""

from pathlib import Path
from typing import Any, Optional, Sequence

import pandas as pd
import structlog
import yaml

import src
from experiments.config import ExperimentConfig
from experiments.runner import run_experiment
from src.errors import ConfigError, SchemaMismatchError
from src.rng import derive_seed

logger = structlog.get_logger()

PUBLISHED_PATH = Path(src.__file__).resolve().parent / "resources" / "published_results.yaml"
PUBLISHED_SCHEMA = "losaw-published-v1"
PUBLISHED_RUNS = 250
METRICS = ("r2_test", "r2_ind", "pr_auc")
LABEL = "desk-scale estimate"
COMPARISON_COLUMNS = [
    "table",
    "regression",
    "phi",
    "n",
    "metric",
    "algorithm",
    "published",
    "reproduced",
    "gap",
    "runs",
    "label",
]


def load_published(path: Path = PUBLISHED_PATH) -> dict[str, Any]:
    with open(path, "r") as f:
        document = yaml.safe_load(f)
    if document.get("schema") != PUBLISHED_SCHEMA:
        raise SchemaMismatchError(f"unsupported published-results schema {document.get('schema')!r}")
    return document


def published_cells(
    table_id: int,
    regression: Optional[int] = None,
    n: Optional[int] = None,
    phi: Optional[float] = None,
    document: Optional[dict[str, Any]] = None,
) -> pd.DataFrame:
    """Published values of one table in long form: regression, phi, n, metric, algorithm, published."""
    document = document or load_published()
    table = document["tables"].get(str(table_id))
    if table is None:
        raise ConfigError(f"unknown table {table_id}; known tables: {sorted(document['tables'])}")
    rows = []
    for name, metrics in table["rows"].items():
        model_id = int(name.lstrip("f"))
        for metric, values in metrics.items():
            for column, value in zip(document["columns"], values):
                rows.append(
                    {
                        "regression": model_id,
                        "phi": float(column["phi"]),
                        "n": int(column["n"]),
                        "metric": metric,
                        "algorithm": column["algorithm"],
                        "published": float(value),
                    }
                )
    frame = pd.DataFrame(rows)
    if regression is not None:
        frame = frame[frame["regression"] == regression]
    if n is not None:
        frame = frame[frame["n"] == n]
    if phi is not None:
        frame = frame[frame["phi"] == phi]
    if frame.empty:
        raise ConfigError(f"no published cells of table {table_id} match the filters")
    return frame.reset_index(drop=True)


def scaled_runs(scale: float) -> int:
    return max(1, round(PUBLISHED_RUNS * scale))


def reproduce_table(
    table_id: int,
    scale: float,
    base: ExperimentConfig,
    *,
    regression: Optional[int] = None,
    n: Optional[int] = None,
    phi: Optional[float] = None,
    n_scale: float = 1.0,
    workers: int = 1,
) -> pd.DataFrame:
    """
    Reproduce every (regression, phi, n) cell of `table_id` passing the
    filters, with `scale` of the published run count and `n_scale` of the
    published sample size. `base` supplies hyperparameters and the seed.
    """
    if not 0 < scale <= 1 or not 0 < n_scale <= 1:
        raise ConfigError("scale and n_scale must lie in (0, 1]")
    document = load_published()
    published = published_cells(table_id, regression, n, phi, document)
    table = document["tables"][str(table_id)]
    runs = scaled_runs(scale)

    rows = []
    for (model_id, cell_phi, cell_n), cell in published.groupby(["regression", "phi", "n"], sort=True):
        cfg = _cell_config(base, table, int(model_id), float(cell_phi), int(cell_n), n_scale, runs, table_id)
        means = run_experiment(cfg, workers).results_frame().groupby("algorithm")[list(METRICS)].mean()
        for item in cell.itertuples(index=False):
            reproduced = float(means.loc[item.algorithm, item.metric])
            rows.append(
                {
                    "table": table_id,
                    "regression": int(model_id),
                    "phi": float(cell_phi),
                    "n": int(cell_n),
                    "metric": item.metric,
                    "algorithm": item.algorithm,
                    "published": item.published,
                    "reproduced": reproduced,
                    "gap": abs(reproduced - item.published),
                    "runs": runs,
                    "label": LABEL,
                }
            )
        logger.info("cell_reproduced", table=table_id, regression=int(model_id), phi=float(cell_phi), n=int(cell_n))
    return pd.DataFrame(rows, columns=COMPARISON_COLUMNS)


def _cell_config(base, table, model_id, phi, n, n_scale, runs, table_id) -> ExperimentConfig:
    document = base.model_dump()
    document["design"] = {
        **document["design"],
        "design": "rf-study",
        "data_kind": table["data_kind"],
        "p": int(table["p"]),
        "regression": model_id,
        "phi": phi,
    }
    document.update(
        n=max(2 * base.forest.min_leaf, round(n * n_scale)),
        runs=runs,
        algorithms=("rf", "losaw-rf"),
        seed=derive_seed(base.seed, "table", table_id, model_id, int(phi * 10), n),
    )
    return ExperimentConfig.model_validate(document)


def table_ids(document: Optional[dict[str, Any]] = None) -> Sequence[int]:
    document = document or load_published()
    return sorted(int(key) for key in document["tables"])
