"""Pipeline configuration: one flat JSON document, unknown keys rejected.

Every knob the CLI and service expose lives here with its validated range,
so a printed config is always re-ingestible unchanged.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ConfigError, FileMissingError


class PipelineConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tau: float = Field(default=0.5, gt=0.0, lt=1.0)
    alpha: float = Field(default=0.9, gt=0.0, le=1.0)
    penalty_f: float = Field(default=1.0, gt=0.0)
    dim: int = Field(default=256, ge=2)
    epsilon: float = Field(default=1e-8, gt=0.0)
    cap_dynamic: int = Field(default=5, ge=1)
    cap_static: int = Field(default=5, ge=1)
    max_depth: int = Field(default=2, ge=0)
    query_budget: int = Field(default=100, ge=1)
    relevance_floor: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    disease_lexicon: Optional[str] = None
    synonym_table: Optional[str] = None
    extractor: Literal["mock", "remote"] = "mock"
    remote_endpoint: Optional[str] = None
    embedding: Literal["builtin"] = "builtin"

    def to_json(self) -> str:
        return json.dumps(self.model_dump(), sort_keys=True, indent=2) + "\n"


def config_from_dict(raw: dict) -> PipelineConfig:
    try:
        return PipelineConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {exc}")


def load_config(path: str | Path | None, overrides: dict | None = None) -> PipelineConfig:
    """Merge an optional config file with non-None overrides."""
    raw: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileMissingError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}")
        if not isinstance(raw, dict):
            raise ConfigError("config file root must be a JSON object")
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    return config_from_dict(raw)
