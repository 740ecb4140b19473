"""Structured pipeline configuration: YAML file, dotted CLI overrides, resolved echo."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Mapping

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator

from app.core.errors import ConfigError
from app.models.dataset import ToyDatasetConfig
from app.models.degradation import DegradationFamily, DegradationSpec
from app.models.training import TrainingConfig

logger = logging.getLogger(__name__)

RESOLVED_CONFIG_NAME = "resolved_config.yaml"


class DegradationRecipe(BaseModel):
    """One degradation applied to every clean image; accepts short codes (gb, gn, ...)."""

    model_config = {"extra": "forbid"}

    family: DegradationFamily
    severity: int = Field(default=0, ge=0, le=3)
    seed: int = Field(default=0, ge=0)
    params: dict[str, float | int] = Field(default_factory=dict)

    @field_validator("family", mode="before")
    @classmethod
    def _from_code(cls, value: Any) -> Any:
        if isinstance(value, str):
            try:
                return DegradationFamily.from_code(value)
            except ValueError as e:
                raise ValueError(f"Unknown degradation family {value!r}") from e
        return value

    def to_spec(self) -> DegradationSpec:
        return DegradationSpec(family=self.family, severity_index=self.severity, params=self.params, seed=self.seed)


def _default_recipes() -> list[DegradationRecipe]:
    return [
        DegradationRecipe(family=DegradationFamily.GAUSSIAN_BLUR, severity=1, seed=11),
        DegradationRecipe(family=DegradationFamily.GAUSSIAN_NOISE, severity=1, seed=12),
    ]


class DatasetSection(BaseModel):
    model_config = {"extra": "forbid"}

    toy: ToyDatasetConfig = Field(default_factory=ToyDatasetConfig)
    degradations: list[DegradationRecipe] = Field(default_factory=_default_recipes)
    segmenter_epochs: int = Field(default=15, ge=0)
    segmenter_batch_size: int = Field(default=16, ge=1)
    segmenter_lr: float = Field(default=2e-3, gt=0)
    segmenter_seed: int = 0

    def specs(self) -> list[DegradationSpec]:
        return [r.to_spec() for r in self.degradations]


class PipelineConfig(BaseModel):
    dataset: DatasetSection = Field(default_factory=DatasetSection)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    run_id: str | None = None

    model_config = {"extra": "forbid"}


def _parse_scalar(text: str) -> Any:
    # YAML scalar rules: "0.5" -> float, "true" -> bool, "[a, b]" -> list
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def apply_overrides(raw: dict[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    """Set ``a.b.c = value`` entries on a nested dict, creating sections as needed."""
    for dotted, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, str):
            value = _parse_scalar(value)
        node = raw
        keys = dotted.split(".")
        for key in keys[:-1]:
            child = node.setdefault(key, {})
            if not isinstance(child, dict):
                raise ConfigError(f"Override {dotted!r}: {key!r} is not a section")
            node = child
        node[keys[-1]] = value
    return raw


def load_pipeline_config(
    path: str | Path | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> PipelineConfig:
    raw: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"Cannot read config {path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"Cannot parse config {path}: {e}") from e
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigError(f"Config {path} must be a mapping at top level")
        raw = loaded or {}
    apply_overrides(raw, overrides or {})
    try:
        return PipelineConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid pipeline config: {e}") from e


def dump_pipeline_config(cfg: PipelineConfig, out_dir: str | Path) -> Path:
    """Echo the fully-resolved config next to the run outputs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / RESOLVED_CONFIG_NAME
    path.write_text(yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False), encoding="utf-8")
    logger.info("Resolved config written to %s", path)
    return path
