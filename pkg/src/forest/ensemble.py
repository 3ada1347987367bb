"""
Random forest.
Bootstrap ensemble of losaw trees, a uniform-weight baseline (eta = 1), and
the modified MDI importance.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.dataset import Dataset, FeatureKind
from src.errors import NoSplitsError
from src.forest.tree import Tree, grow_tree
from src.forest.weighting import LosawWeigher
from src.propensity import AdjustmentSet, LogisticSettings, StabilizerStats, adjustment_sets
from src.rng import derive_seed, substream
from src.weights import EssConfig

logger = structlog.get_logger()


class ForestConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_tree: int = Field(default=100, ge=1)
    max_depth: int = Field(default=10, ge=0)
    min_leaf: int = Field(default=5, ge=1)
    # None means floor(P / 3), at least 1
    m_try: Optional[int] = Field(default=None, ge=1)
    eta: float = Field(default=0.25, ge=0.0, le=1.0)
    alpha: float = Field(default=0.01, gt=0.0)
    q_max: int = Field(default=10, ge=0)
    corr_threshold: float = Field(default=0.1, ge=0.0, lt=1.0)
    prelim_n_tree: Optional[int] = Field(default=None, ge=1)
    mse_mode: Literal["unweighted", "weighted"] = "unweighted"
    logistic: LogisticSettings = Field(default_factory=LogisticSettings)
    n_jobs: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check_ess(self) -> "ForestConfig":
        EssConfig(eta=self.eta, alpha=self.alpha)
        return self

    @property
    def ess(self) -> EssConfig:
        return EssConfig(eta=self.eta, alpha=self.alpha)

    def resolved_m_try(self, p: int) -> int:
        m_try = self.m_try if self.m_try is not None else max(1, p // 3)
        return min(m_try, p)

    def baseline(self) -> "ForestConfig":
        return self.model_copy(update={"eta": 1.0})


@dataclass
class Forest:
    trees: list[Tree]
    config: ForestConfig
    kinds: tuple[FeatureKind, ...]
    seed: int
    adjustment: Optional[dict[int, AdjustmentSet]] = field(default=None)

    @property
    def n_features(self) -> int:
        return len(self.kinds)

    def predict_many(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.shape[1]}")
        return np.mean([tree.predict(x) for tree in self.trees], axis=0)

    def ess_summary(self) -> dict[str, float]:
        """Mean and minimum relative ESS of the winning weights over all splits."""
        values = [node.ess_rel for tree in self.trees for node in tree.nodes() if not node.is_leaf]
        if not values:
            return {"mean": float("nan"), "min": float("nan"), "splits": 0}
        return {"mean": float(np.mean(values)), "min": float(np.min(values)), "splits": len(values)}


def predict(forest: Forest, x: np.ndarray) -> float:
    """Ensemble mean for a single feature row."""
    return float(forest.predict_many(np.asarray(x, dtype=float).reshape(1, -1))[0])


def mdi_importance(forest: Forest) -> np.ndarray:
    """
    Per-tree importance normalized to sum 1 and averaged over all trees.
    Trees without a split contribute the zero vector.
    """
    fi = np.zeros(forest.n_features)
    contributing = 0
    for tree in forest.trees:
        pre = tree.importance_pre()
        total = pre.sum()
        if total > 0:
            fi += pre / total
            contributing += 1
    if contributing == 0:
        raise NoSplitsError("no splits")
    return fi / len(forest.trees)


def _stabilizer_stats(data: Dataset) -> dict[int, StabilizerStats]:
    return {p: StabilizerStats.of(data.x[:, p]) for p, kind in enumerate(data.kinds) if not kind.is_discrete}


def preliminary_adjustment(data: Dataset, cfg: ForestConfig, seed: int) -> dict[int, AdjustmentSet]:
    """Adjustment sets from the MDI of an eta = 1 forest on the full training set."""
    prelim_cfg = cfg.model_copy(update={"eta": 1.0, "n_tree": cfg.prelim_n_tree or cfg.n_tree})
    prelim = fit_forest(data, prelim_cfg, derive_seed(seed, "prelim"))
    try:
        initial_fi = mdi_importance(prelim)
    except NoSplitsError:
        logger.warning("prelim_forest_without_splits", n=data.n, p=data.p)
        initial_fi = np.zeros(data.p)
    return adjustment_sets(data, initial_fi, cfg.q_max, cfg.corr_threshold)


def fit_forest(
    data: Dataset,
    cfg: ForestConfig,
    seed: int,
    adjustment: Optional[dict[int, AdjustmentSet]] = None,
) -> Forest:
    """
    Fit `cfg.n_tree` trees on bootstrap resamples of size N. Tree t draws its
    bootstrap from stream ("bootstrap", t) and its m_try candidates from
    ("m_try", t), so forests with the same seed share both.
    """
    if data.n < 2:
        raise ValueError("a forest needs at least 2 observations")

    if cfg.eta < 1.0:
        if adjustment is None:
            adjustment = preliminary_adjustment(data, cfg, seed)
        weigher = LosawWeigher(
            kinds=data.kinds,
            adjustment=adjustment,
            ess=cfg.ess,
            stats=_stabilizer_stats(data),
            logistic=cfg.logistic,
        )
    else:
        weigher = None

    def build(t: int) -> Tree:
        rows = substream(seed, "bootstrap", t).integers(0, data.n, size=data.n)
        return grow_tree(data.take(rows), cfg, substream(seed, "m_try", t), weigher)

    if cfg.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
            trees = list(pool.map(build, range(cfg.n_tree)))
    else:
        trees = [build(t) for t in range(cfg.n_tree)]

    forest = Forest(trees=trees, config=cfg, kinds=data.kinds, seed=seed, adjustment=adjustment)
    logger.info(
        "forest_fitted",
        n_tree=cfg.n_tree,
        eta=cfg.eta,
        n=data.n,
        p=data.p,
        splits=sum(tree.n_splits for tree in trees),
    )
    return forest
