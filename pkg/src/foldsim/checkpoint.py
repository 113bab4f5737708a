"""Self-describing checkpoint files shared by the translation and segmentation stages."""

from __future__ import annotations

import hashlib
import io as _io
from pathlib import Path

import torch

from .io import atomic_write_bytes

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, kind: str, payload: dict) -> Path:
    """Serialise ``payload`` with a format header and rename it into place atomically."""
    buf = _io.BytesIO()
    torch.save({"format_version": FORMAT_VERSION, "kind": kind, **payload}, buf)
    atomic_write_bytes(path, buf.getvalue())
    return Path(path)


def load_checkpoint(path, kind: str | None = None) -> dict:
    path = Path(path)
    try:
        data = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:  # torch surfaces corrupt files as several unrelated types
        raise CheckpointError(f"{path}: cannot read checkpoint ({exc})") from exc
    if not isinstance(data, dict) or data.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint format")
    if kind is not None and data.get("kind") != kind:
        raise CheckpointError(f"{path}: expected a {kind} checkpoint, found {data.get('kind')!r}")
    return data


def checkpoint_id(path) -> str:
    """Short content hash, stable across copies of the same file."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:12]
