"""
Experiment configuration.
One validated document describes a Monte-Carlo experiment: the synthetic
design, sample sizes, the algorithms to compare and their hyperparameters.
"""

from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.config_loader import deep_merge, load_config_document, load_defaults
from src.datagen.generators import DesignConfig
from src.errors import ConfigError
from src.forest.ensemble import ForestConfig
from src.losawgd.trainer import GdConfig

Algorithm = Literal["rf", "losaw-rf", "gd", "losaw-gd"]

FOREST_ALGORITHMS = ("rf", "losaw-rf")
GD_ALGORITHMS = ("gd", "losaw-gd")


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    design: DesignConfig = Field(default_factory=DesignConfig)
    n: int = Field(default=500, ge=2)
    n_test: int = Field(default=1000, ge=2)
    n_independent: int = Field(default=1000, ge=2)
    algorithms: tuple[Algorithm, ...] = ("rf", "losaw-rf")
    forest: ForestConfig = Field(default_factory=ForestConfig)
    gd: GdConfig = Field(default_factory=GdConfig)
    # override eta / alpha of the losaw arms when set
    eta: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    alpha: Optional[float] = Field(default=None, gt=0.0)
    runs: int = Field(default=1, ge=1)
    seed: int = Field(ge=0)

    @model_validator(mode="after")
    def _check(self) -> "ExperimentConfig":
        if not self.algorithms:
            raise ValueError("at least one algorithm is required")
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ValueError("algorithms must be distinct")
        # validates the overridden eta / alpha pair
        self.forest_config()
        self.gd_config(0)
        return self

    def _losaw_updates(self) -> dict[str, Any]:
        updates: dict[str, Any] = {}
        if self.eta is not None:
            updates["eta"] = self.eta
        if self.alpha is not None:
            updates["alpha"] = self.alpha
        return updates

    def forest_config(self, algorithm: str = "losaw-rf") -> ForestConfig:
        if algorithm == "rf":
            return self.forest.baseline()
        return ForestConfig.model_validate({**self.forest.model_dump(), **self._losaw_updates()})

    def gd_config(self, seed: int) -> GdConfig:
        return GdConfig.model_validate({**self.gd.model_dump(), **self._losaw_updates(), "seed": seed})

    def with_eta(self, eta: float) -> "ExperimentConfig":
        """Copy at `eta`, shrinking alpha to at most eta / 2 so the pair stays valid."""
        alpha = self.alpha if self.alpha is not None else self.forest.alpha
        return ExperimentConfig.model_validate(
            {**self.model_dump(), "eta": eta, "alpha": min(alpha, eta / 2) if eta > 0 else alpha}
        )


def format_validation_error(error: ValidationError) -> str:
    """One line per failing field, as `loc: msg`."""
    lines = []
    for item in error.errors():
        loc = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{loc}: {item['msg']}")
    return "\n".join(lines)


def resolve_config(
    document_path: Optional[str],
    overrides: dict[str, Any],
    defaults_path: str,
) -> tuple[ExperimentConfig, dict[str, Any]]:
    """
    Layer repository defaults, the experiment document and command-line
    overrides; returns the validated config and the merged raw document.
    """
    merged = load_defaults(defaults_path)
    if document_path:
        merged = deep_merge(merged, load_config_document(document_path))
    merged = deep_merge(merged, overrides)
    try:
        return ExperimentConfig.model_validate(merged), merged
    except ValidationError as e:
        raise ConfigError(f"invalid experiment configuration:\n{format_validation_error(e)}") from e
