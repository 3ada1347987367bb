"""
Node weighting.
Turns a node sample and a candidate feature into losaw weights: fit the
feature's propensity model on the node rows, invert, cap to the minimum
relative effective sample size.
"""

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import structlog

from src.dataset import FeatureKind
from src.errors import SearchNotConvergedError
from src.forest.splits import NodeSample
from src.propensity import AdjustmentSet, LogisticSettings, StabilizerStats, node_scores
from src.weights import EssConfig, SampleWeights, weights_from_propensities

logger = structlog.get_logger()


@dataclass(frozen=True)
class LosawWeigher:
    kinds: Sequence[FeatureKind]
    adjustment: Mapping[int, AdjustmentSet]
    ess: EssConfig
    stats: Mapping[int, StabilizerStats] = field(default_factory=dict)
    logistic: LogisticSettings = field(default_factory=LogisticSettings)

    def __call__(self, node: NodeSample, feature: int) -> SampleWeights:
        if self.ess.eta >= 1.0:
            return SampleWeights.uniform(node.n)
        scores = node_scores(
            node.x,
            self.kinds,
            self.adjustment.get(feature, AdjustmentSet(feature)),
            stats=self.stats.get(feature),
            settings=self.logistic,
        )
        try:
            return weights_from_propensities(scores, self.ess)
        except SearchNotConvergedError as e:
            logger.warning("node_weights_best_iterate", feature=feature, gap=e.gap)
            return e.best
