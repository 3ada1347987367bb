"""
Network checkpoints and training traces.
Checkpoints are JSON (layer sizes plus flattened parameter arrays); traces
are CSV with columns step, feature, batch_ess, loss.
"""

import json
from dataclasses import asdict
from pathlib import Path
from typing import Any, Sequence, Union

import numpy as np
import pandas as pd
import structlog

from src.errors import SchemaMismatchError
from src.losawgd.network import DenseNet
from src.losawgd.trainer import TraceRow

logger = structlog.get_logger()

NETWORK_SCHEMA = "losaw-network-v1"
TRACE_COLUMNS = ["step", "feature", "batch_ess", "loss"]

PathLike = Union[str, Path]


def network_to_dict(net: DenseNet) -> dict[str, Any]:
    return {
        "schema": NETWORK_SCHEMA,
        "sizes": net.sizes,
        "weights": [w.ravel().tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def network_from_dict(payload: dict[str, Any]) -> DenseNet:
    if payload.get("schema") != NETWORK_SCHEMA:
        raise SchemaMismatchError(f"unsupported network schema {payload.get('schema')!r}")
    sizes = [int(s) for s in payload["sizes"]]
    shapes = list(zip(sizes, sizes[1:]))
    if len(payload["weights"]) != len(shapes) or len(payload["biases"]) != len(shapes):
        raise SchemaMismatchError("layer count does not match the recorded sizes")
    try:
        weights = [np.asarray(w, dtype=float).reshape(shape) for w, shape in zip(payload["weights"], shapes)]
    except ValueError as e:
        raise SchemaMismatchError(f"weight array does not match its layer size: {e}")
    biases = [np.asarray(b, dtype=float) for b in payload["biases"]]
    return DenseNet(weights, biases)


def save_network(net: DenseNet, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(network_to_dict(net)) + "\n")
    logger.info("network_saved", path=str(path), sizes=net.sizes)
    return path


def load_network(path: PathLike) -> DenseNet:
    return network_from_dict(json.loads(Path(path).read_text()))


def write_trace(trace: Sequence[TraceRow], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([asdict(row) for row in trace], columns=TRACE_COLUMNS)
    frame.to_csv(path, index=False, float_format="%.17g")
    return path


def read_trace(path: PathLike) -> list[TraceRow]:
    frame = pd.read_csv(path, float_precision="round_trip")
    if list(frame.columns) != TRACE_COLUMNS:
        raise SchemaMismatchError(f"{path} is not a training trace")
    return [
        TraceRow(step=int(r.step), feature=int(r.feature), batch_ess=float(r.batch_ess), loss=float(r.loss))
        for r in frame.itertuples(index=False)
    ]
