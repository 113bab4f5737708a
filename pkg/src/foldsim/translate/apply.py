"""Map a simulated dataset through a trained generator (Sim -> Sim-Aug)."""

from __future__ import annotations

import shutil
from pathlib import Path

import numpy as np
import torch

from .. import io
from ..checkpoint import checkpoint_id
from ..manifest import DatasetManifest, FrameRecord
from .train import load_generator


class ResolutionMismatch(ValueError):
    pass


@torch.no_grad()
def translate_image(G, rgb: np.ndarray) -> np.ndarray:
    """``rgb`` in [0, 1], ``(H, W, 3)``; returns the translated image in the same range."""
    x = torch.from_numpy(np.asarray(rgb, dtype=np.float32)).permute(2, 0, 1)[None] * 2.0 - 1.0
    y = G(x)[0].permute(1, 2, 0).numpy().astype(np.float64)
    return (y + 1.0) * 0.5


def translate_dataset(checkpoint, manifest: DatasetManifest, out_dir, name: str = "Sim-Aug") -> DatasetManifest:
    """Translate every frame; labels and depth are copied byte-for-byte from the source."""
    G, ckpt = load_generator(checkpoint)
    ckpt_id = checkpoint_id(checkpoint)
    size = tuple(ckpt["image_size"])
    out_dir = Path(out_dir)
    records = []
    for rec in manifest.frames:
        rgb = io.read_rgb(manifest.path(rec.rgb))
        if rgb.shape[:2] != size:
            raise ResolutionMismatch(f"frame {rec.id} is {rgb.shape[0]}x{rgb.shape[1]}, "
                                     f"checkpoint was trained at {size[0]}x{size[1]}")
        files = {}
        for kind, rel in rec.files().items():
            dst = out_dir / rel
            dst.parent.mkdir(parents=True, exist_ok=True)
            if kind == "rgb":
                io.write_rgb(dst, translate_image(G, rgb))
            else:
                shutil.copyfile(manifest.path(rel), dst)
            files[kind] = rel
        records.append(FrameRecord(id=rec.id, pose=rec.pose, intrinsics=rec.intrinsics,
                                   source_id=rec.id, checkpoint_id=ckpt_id, **files))
    out = DatasetManifest(
        name=name, role=manifest.role, split=f"{name}-{manifest.role}", frame_count=len(records),
        frames=records, fps=manifest.fps, annotations=manifest.annotations,
        params={**manifest.params, "source": manifest.name, "checkpoint_id": ckpt_id,
                "oracle": ckpt.get("oracle", "")},
        provenance=f"{manifest.name} frames translated by checkpoint {ckpt_id}; labels and depth copied",
    )
    out.save(out_dir / "manifest.json")
    out.base_dir = out_dir
    return out
