"""
Datasets.
Feature matrix, responses and per-feature kinds shared by every model.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from src.errors import SchemaMismatchError


@dataclass(frozen=True)
class FeatureKind:
    """Discrete with ordered numeric `levels`, or continuous when `levels` is None."""

    levels: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.levels is None:
            return
        levels = tuple(float(v) for v in self.levels)
        if len(levels) < 2:
            raise ValueError("a discrete feature needs at least 2 levels")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("levels must be strictly increasing")
        object.__setattr__(self, "levels", levels)

    @classmethod
    def discrete(cls, levels: Sequence[float]) -> "FeatureKind":
        return cls(tuple(levels))

    @classmethod
    def continuous(cls) -> "FeatureKind":
        return cls(None)

    @property
    def is_discrete(self) -> bool:
        return self.levels is not None

    @property
    def n_levels(self) -> int:
        return len(self.levels) if self.levels is not None else 0

    def to_dict(self) -> dict:
        if self.is_discrete:
            return {"kind": "discrete", "levels": list(self.levels)}
        return {"kind": "continuous"}

    @classmethod
    def from_dict(cls, payload: dict) -> "FeatureKind":
        if payload.get("kind") == "discrete":
            return cls.discrete(payload["levels"])
        if payload.get("kind") == "continuous":
            return cls.continuous()
        raise SchemaMismatchError(f"unknown feature kind: {payload!r}")


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    kinds: tuple[FeatureKind, ...] = field(default=())

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2:
            raise ValueError("x must be a 2-d matrix")
        if y.shape != (x.shape[0],):
            raise ValueError(f"y has shape {y.shape}, expected ({x.shape[0]},)")
        kinds = tuple(self.kinds) or tuple(FeatureKind.continuous() for _ in range(x.shape[1]))
        if len(kinds) != x.shape[1]:
            raise ValueError(f"{len(kinds)} feature kinds for {x.shape[1]} columns")
        for j, kind in enumerate(kinds):
            if kind.is_discrete and not np.all(np.isin(x[:, j], kind.levels)):
                raise SchemaMismatchError(f"feature {j} holds values outside its levels")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "kinds", kinds)

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    @property
    def p(self) -> int:
        return int(self.x.shape[1])

    def take(self, rows: np.ndarray) -> "Dataset":
        """Rows `rows` (repeats allowed, as in a bootstrap)."""
        return Dataset(self.x[rows], self.y[rows], self.kinds)

    def check_schema(self, kinds: Sequence[FeatureKind]) -> None:
        if tuple(kinds) != self.kinds:
            raise SchemaMismatchError(
                f"schema mismatch: dataset has {self.p} features, model expects {len(kinds)}"
            )
