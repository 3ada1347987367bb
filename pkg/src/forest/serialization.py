"""
Forest serialization.
Versioned JSON documents: nodes as nested objects, configuration echoed.
"""

import json
from pathlib import Path
from typing import Any, Union

import structlog

from src.dataset import FeatureKind
from src.errors import SchemaMismatchError
from src.forest.ensemble import Forest, ForestConfig
from src.forest.tree import Tree, TreeNode
from src.propensity import AdjustmentSet

logger = structlog.get_logger()

FOREST_SCHEMA = "losaw-forest-v1"


def forest_to_dict(forest: Forest) -> dict[str, Any]:
    adjustment = None
    if forest.adjustment is not None:
        adjustment = {str(p): list(adj.adjusters) for p, adj in sorted(forest.adjustment.items())}
    return {
        "schema": FOREST_SCHEMA,
        "seed": forest.seed,
        "config": forest.config.model_dump(mode="json"),
        "kinds": [kind.to_dict() for kind in forest.kinds],
        "adjustment": adjustment,
        "trees": [tree.root.to_dict() for tree in forest.trees],
    }


def forest_from_dict(payload: dict[str, Any]) -> Forest:
    if payload.get("schema") != FOREST_SCHEMA:
        raise SchemaMismatchError(f"unsupported forest schema: {payload.get('schema')!r}")
    kinds = tuple(FeatureKind.from_dict(kind) for kind in payload["kinds"])
    adjustment = None
    if payload.get("adjustment") is not None:
        adjustment = {int(p): AdjustmentSet(int(p), tuple(adj)) for p, adj in payload["adjustment"].items()}
    trees = [Tree(root=TreeNode.from_dict(root), n_features=len(kinds)) for root in payload["trees"]]
    return Forest(
        trees=trees,
        config=ForestConfig.model_validate(payload["config"]),
        kinds=kinds,
        seed=int(payload["seed"]),
        adjustment=adjustment,
    )


def save_forest(forest: Forest, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(forest_to_dict(forest), indent=1, sort_keys=True) + "\n")
    logger.info("forest_saved", path=str(path), n_tree=len(forest.trees))
    return path


def load_forest(path: Union[str, Path]) -> Forest:
    with open(path, "r") as f:
        return forest_from_dict(json.load(f))
