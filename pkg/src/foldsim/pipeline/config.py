"""Experiment configuration: one JSON file with a section per stage."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..translate.losses import LossWeights

STAGES = ("gen-data", "train-translate", "translate", "train-seg", "eval", "report")


class ConfigError(ValueError):
    pass


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")
    enabled: bool = True


class GenDataSection(_Section):
    mesh: str = "builtin:bumpy_cylinder"
    resolution: int = Field(32, gt=0)
    train_frames: int = Field(64, gt=0)
    test_frames: int = Field(16, gt=0)
    real_frames: int = Field(64, gt=0)
    fov_deg: float = Field(100.0, gt=0, lt=180)
    fps: float = Field(50.0, gt=0)


class TrainTranslateSection(_Section):
    steps: int = Field(2000, gt=0)
    weights: str = "1,10,5,1"
    oracle: str = "stub"
    gen_width: int = Field(8, gt=0)
    disc_width: int = Field(8, gt=0)
    pool_capacity: int = Field(50, ge=0)
    lr: float = Field(2e-4, gt=0)
    log_every: int = Field(1, gt=0)

    @field_validator("weights")
    @classmethod
    def _weights(cls, v):
        LossWeights.parse(v)
        return v


class TranslateSection(_Section):
    pass


class TrainSegSection(_Section):
    epochs: int = Field(150, gt=0)
    lr: float = Field(1e-2, gt=0)
    triples_per_batch: int = Field(8, gt=0)
    backbone: str = "small"
    width: int = Field(8, gt=0)
    augment: bool = True


class EvalSection(_Section):
    tau: float = Field(0.5, ge=0, le=1)
    sets: list[str] = ["Sim-Aug", "Real"]

    @field_validator("sets")
    @classmethod
    def _sets(cls, v):
        bad = set(v) - {"Sim", "Sim-Aug", "Real"}
        if bad or not v:
            raise ValueError(f"eval sets must be drawn from Sim, Sim-Aug, Real (got {v})")
        return v


class ReportSection(_Section):
    include_recorded: bool = False


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    seed: int = 0
    output_root: str = "runs/experiment"
    gen_data: GenDataSection = Field(default_factory=GenDataSection, alias="gen-data")
    train_translate: TrainTranslateSection = Field(default_factory=TrainTranslateSection, alias="train-translate")
    translate: TranslateSection = Field(default_factory=TranslateSection)
    train_seg: TrainSegSection = Field(default_factory=TrainSegSection, alias="train-seg")
    eval: EvalSection = Field(default_factory=EvalSection)
    report: ReportSection = Field(default_factory=ReportSection)
    source: Optional[Path] = Field(default=None, exclude=True)

    def section(self, stage: str) -> _Section:
        return getattr(self, stage.replace("-", "_"))

    def canonical(self, exclude_root: bool = True) -> str:
        data = self.model_dump(mode="json", by_alias=True, exclude={"output_root"} if exclude_root else None)
        return json.dumps(data, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def stage_hash(self, stage: str, upstream: list[str]) -> str:
        payload = json.dumps({"stage": stage, "seed": self.seed, "upstream": upstream,
                              "section": self.section(stage).model_dump(mode="json")}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()

    def mesh_path(self) -> Optional[Path]:
        mesh = self.gen_data.mesh
        if mesh.startswith("builtin:"):
            return None
        path = Path(mesh)
        if not path.is_absolute() and self.source is not None:
            path = self.source.parent / path
        return path


def load_config(path) -> ExperimentConfig:
    """Parse and validate; every failure is a :class:`ConfigError` naming the offending field."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        fields = ", ".join(".".join(str(p) for p in e["loc"]) for e in exc.errors())
        raise ConfigError(f"{path}: invalid field(s) {fields}\n{exc}") from exc
    cfg.source = path.resolve()
    validate_inputs(cfg)
    return cfg


def validate_inputs(cfg: ExperimentConfig) -> None:
    from ..geo.shapes import BUILTIN_SHAPES

    mesh = cfg.gen_data.mesh
    if cfg.gen_data.enabled:
        if mesh.startswith("builtin:"):
            if mesh.split(":", 1)[1] not in BUILTIN_SHAPES:
                raise ConfigError(f"gen-data.mesh: unknown builtin {mesh!r}; known: {sorted(BUILTIN_SHAPES)}")
        elif not cfg.mesh_path().is_file():
            raise ConfigError(f"gen-data.mesh: file not found: {cfg.mesh_path()}")
    if cfg.train_translate.enabled and cfg.train_translate.oracle != "stub":
        if not Path(cfg.train_translate.oracle).is_file():
            raise ConfigError(f"train-translate.oracle: file not found: {cfg.train_translate.oracle}")
