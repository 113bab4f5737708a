"""Dataset manifests: the JSON index every stage reads and writes.

Frame paths are stored relative to the manifest's directory.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, Field, ValidationError, model_validator

FRAME_FILES = ("rgb", "binary", "instance", "depth")


class ManifestError(ValueError):
    pass


class Annotations(BaseModel):
    fold_labels: bool = False
    depth: bool = False
    manual: bool = False


class FrameRecord(BaseModel):
    id: str
    rgb: str
    binary: Optional[str] = None
    instance: Optional[str] = None
    depth: Optional[str] = None
    pose: Optional[list[float]] = Field(default=None, min_length=7, max_length=7)
    intrinsics: Optional[list[float]] = Field(default=None, min_length=4, max_length=4)
    source_id: Optional[str] = None
    checkpoint_id: Optional[str] = None

    def files(self) -> dict[str, str]:
        return {k: getattr(self, k) for k in FRAME_FILES if getattr(self, k)}


class DatasetManifest(BaseModel):
    name: str
    role: Literal["train", "test"]
    split: str = ""
    frame_count: int
    frames: list[FrameRecord]
    fps: Optional[float] = None
    annotations: Annotations = Annotations()
    params: dict = {}
    provenance: str = ""
    base_dir: Optional[Path] = Field(default=None, exclude=True)

    @model_validator(mode="after")
    def _check(self):
        if self.frame_count != len(self.frames):
            raise ValueError(f"frame_count {self.frame_count} != {len(self.frames)} records")
        ids = [f.id for f in self.frames]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate frame ids")
        return self

    def path(self, rel: str) -> Path:
        return (self.base_dir or Path(".")) / rel

    def by_id(self) -> dict[str, FrameRecord]:
        return {f.id: f for f in self.frames}

    def missing_files(self) -> list[Path]:
        return [self.path(p) for f in self.frames for p in f.files().values() if not self.path(p).is_file()]

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = self.model_dump(mode="json", exclude={"base_dir"})
        path.write_text(json.dumps(payload, indent=1), encoding="utf-8")
        return path


def load_manifest(path, check_files: bool = True) -> DatasetManifest:
    """Parse and validate a manifest; optionally require every referenced file to exist."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    try:
        manifest = DatasetManifest.model_validate(data)
    except ValidationError as exc:
        raise ManifestError(f"{path}: schema violation\n{exc}") from exc
    manifest.base_dir = path.parent
    if check_files:
        missing = manifest.missing_files()
        if missing:
            listed = "\n  ".join(str(p) for p in missing[:20])
            more = f"\n  ... and {len(missing) - 20} more" if len(missing) > 20 else ""
            raise ManifestError(f"{path}: {len(missing)} referenced file(s) missing:\n  {listed}{more}")
    return manifest


class DatasetPreset(BaseModel):
    """Size and annotation record of a published dataset (no frames attached)."""

    name: str
    splits: dict[str, int]
    annotations: Annotations
    details: str = ""


@lru_cache(maxsize=None)
def dataset_presets() -> dict[str, DatasetPreset]:
    raw = json.loads(resources.files("foldsim.data").joinpath("dataset_presets.json").read_text("utf-8"))
    return {d["name"]: DatasetPreset.model_validate(d) for d in raw}
