"""
Run configuration for the command-line front end.

A run is described by a ``RunConfig``: optionally loaded from a JSON file,
then overridden by command-line flags. Unknown keys are rejected so a typo
in a config file cannot silently change an experiment.
"""

import hashlib
import json
import logging
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .bounds import SUBSET_CAP, BoundKind
from .calibration import DEFAULT_TOL_REL
from .errors import UsageError

logger = logging.getLogger(__name__)

Command = Literal['gen', 'bound', 'calibrate', 'sweep-alpha', 'sweep-epsilon', 'certify']


class GridSpec(BaseModel):
    """An evenly spaced (lin) or geometrically spaced (log) grid."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    start: float
    stop: float
    points: int = Field(ge=2)
    scale: Literal['lin', 'log'] = 'lin'

    @model_validator(mode='after')
    def _positive_extent(self):
        if not self.stop > self.start:
            raise ValueError(f"grid needs stop > start, got {self.start}..{self.stop}")
        if self.scale == 'log' and self.start <= 0:
            raise ValueError("log grids need a positive start")
        return self

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """Parse ``start:stop:points[:lin|log]``."""
        parts = text.strip().split(':')
        if len(parts) not in (3, 4):
            raise UsageError(f"grid '{text}' must look like start:stop:points:lin|log")
        try:
            start, stop, points = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise UsageError(f"grid '{text}' has a non-numeric field")
        scale = parts[3].lower() if len(parts) == 4 else 'lin'
        try:
            return cls(start=start, stop=stop, points=points, scale=scale)
        except ValidationError as e:
            raise UsageError(f"grid '{text}' is invalid: {e.errors()[0]['msg']}")

    def values(self) -> np.ndarray:
        if self.scale == 'log':
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)


class RunConfig(BaseModel):
    """One CLI invocation, fully specified."""

    model_config = ConfigDict(extra='forbid')

    command: Command
    workload: Optional[str] = None
    b: Optional[float] = Field(default=None, gt=0)
    alpha: Optional[float] = Field(default=None, gt=0)
    alpha_grid: Optional[GridSpec] = None
    eps: Optional[float] = Field(default=None, gt=0)
    eps_grid: Optional[GridSpec] = None
    kinds: Optional[List[BoundKind]] = None
    n: int = Field(default=2, ge=1)
    trials: int = Field(default=10000, ge=0)
    seed: int = Field(default=0, ge=0)
    out: Optional[str] = None
    subset_cap: int = Field(default=SUBSET_CAP, ge=1)
    tol_rel: float = Field(default=DEFAULT_TOL_REL, gt=0, le=1e-2)

    @field_validator('alpha_grid', 'eps_grid', mode='before')
    @classmethod
    def _grid_from_text(cls, value):
        if isinstance(value, str):
            return GridSpec.parse(value)
        return value

    @field_validator('workload')
    @classmethod
    def _single_source(cls, value):
        if value is not None and not value.strip():
            raise ValueError("workload source is empty")
        return value

    def workload_source(self) -> str:
        """Configured workload, or the preset for the command (difference queries for the eps sweep)."""
        if self.workload:
            return self.workload
        return 'haar:8' if self.command == 'sweep-epsilon' else 'histogram:8'

    def noise_scale(self) -> float:
        return self.b if self.b is not None else 1.0

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of everything that determines the output's content."""
        payload = self.model_dump(mode='json', exclude={'out'})
        canonical = json.dumps(payload, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def load_run_config(path: Optional[str], overrides: Dict[str, Any]) -> RunConfig:
    """
    Build a RunConfig from an optional JSON file and flag overrides.

    Args:
        path: JSON config file, or None
        overrides: Flag values; None entries do not override

    Returns:
        Validated RunConfig

    Raises:
        UsageError: If the file is unreadable, not a JSON object, or invalid
    """
    values: Dict[str, Any] = {}
    if path:
        try:
            with open(path, 'r', encoding='utf-8') as handle:
                values = json.load(handle)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config '{path}': {e}")
        if not isinstance(values, dict):
            raise UsageError(f"config '{path}' must hold a JSON object")
        logger.info(f"Loaded run config from {path}")

    values.update({key: value for key, value in overrides.items() if value is not None})
    try:
        return RunConfig.model_validate(values)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in error['loc']) or 'config'}: {error['msg']}" for error in e.errors()
        )
        raise UsageError(f"invalid run config: {problems}")
