"""
Dataset files.
A CSV with columns x1..xP, y and a JSON sidecar holding the feature kinds
and whatever provenance the caller passes (design echo, seed).
"""

import json
from pathlib import Path
from typing import Any, Optional, Union

import pandas as pd
import structlog

from src.dataset import Dataset, FeatureKind
from src.errors import SchemaMismatchError

logger = structlog.get_logger()

DATASET_SCHEMA = "losaw-dataset-v1"

PathLike = Union[str, Path]


def sidecar_path(path: PathLike) -> Path:
    return Path(path).with_suffix(".json")


def dataset_frame(data: Dataset) -> pd.DataFrame:
    frame = pd.DataFrame(data.x, columns=[f"x{j + 1}" for j in range(data.p)])
    frame["y"] = data.y
    return frame


def save_dataset(data: Dataset, path: PathLike, meta: Optional[dict[str, Any]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dataset_frame(data).to_csv(path, index=False, float_format="%.17g")
    sidecar = {
        "schema": DATASET_SCHEMA,
        "n": data.n,
        "p": data.p,
        "kinds": [kind.to_dict() for kind in data.kinds],
        "meta": meta or {},
    }
    sidecar_path(path).write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    logger.info("dataset_saved", path=str(path), n=data.n, p=data.p)
    return path


def load_dataset(path: PathLike) -> tuple[Dataset, dict[str, Any]]:
    """Read a CSV written by `save_dataset`; returns the dataset and the sidecar meta."""
    path = Path(path)
    try:
        sidecar = json.loads(sidecar_path(path).read_text())
    except FileNotFoundError:
        raise SchemaMismatchError(f"missing sidecar {sidecar_path(path)}")
    if sidecar.get("schema") != DATASET_SCHEMA:
        raise SchemaMismatchError(f"unsupported dataset schema {sidecar.get('schema')!r}")

    frame = pd.read_csv(path, float_precision="round_trip")
    kinds = tuple(FeatureKind.from_dict(item) for item in sidecar["kinds"])
    expected = [f"x{j + 1}" for j in range(len(kinds))] + ["y"]
    if list(frame.columns) != expected:
        raise SchemaMismatchError(f"{path} has columns {list(frame.columns)}, sidecar expects {expected}")

    data = Dataset(
        frame[expected[:-1]].to_numpy(dtype=float),
        frame["y"].to_numpy(dtype=float),
        kinds,
    )
    logger.debug("dataset_loaded", path=str(path), n=data.n, p=data.p)
    return data, sidecar.get("meta", {})
