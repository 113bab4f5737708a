"""Inference: fold masks, score maps and connected-component instances."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import torch
from scipy import ndimage

from .. import io
from ..checkpoint import load_checkpoint
from ..manifest import Annotations, DatasetManifest, FrameRecord
from .model import SegModel
from .train import CHECKPOINT_KIND, SegTrainConfig, build_model

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)
MIN_AREA_256 = 50


def default_min_area(height: int, width: int) -> int:
    """50 px at 256x256, scaled with image area."""
    return max(1, round(MIN_AREA_256 * height * width / (256 * 256)))


def load_seg_model(path):
    ckpt = load_checkpoint(path, CHECKPOINT_KIND)
    model = build_model(SegTrainConfig(**ckpt["config"]))
    model.load_state_dict(ckpt["params"])
    model.eval()
    return model, ckpt


@torch.no_grad()
def predict_mask(model: SegModel, image: np.ndarray, image_size: tuple[int, int] | None = None):
    """Return ``(binary mask uint8 (H, W), class probabilities (2, H, W))`` for an RGB image in [0, 1]."""
    image = np.asarray(image, dtype=np.float32)
    if image_size is not None and image.shape[:2] != tuple(image_size):
        raise ValueError(f"image is {image.shape[0]}x{image.shape[1]}, model expects "
                         f"{image_size[0]}x{image_size[1]}")
    model.eval()
    x = torch.from_numpy(image).permute(2, 0, 1)[None]
    prob = torch.softmax(model(x), dim=1)[0]
    return prob.argmax(dim=0).numpy().astype(np.uint8), prob.numpy()


def extract_instances(mask: np.ndarray, min_area: int = MIN_AREA_256) -> np.ndarray:
    """4-connected components numbered 1..K by decreasing area; components under ``min_area`` dropped.

    Equal areas are ordered by first pixel in raster order.
    """
    labels, n = ndimage.label(np.asarray(mask) > 0, structure=FOUR_CONNECTED)
    if n == 0:
        return np.zeros(labels.shape, dtype=np.int32)
    areas = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    keep = [i + 1 for i in np.argsort(-areas, kind="stable") if areas[i] >= min_area]
    lut = np.zeros(n + 1, dtype=np.int32)
    lut[keep] = np.arange(1, len(keep) + 1, dtype=np.int32)
    return lut[labels]


def predict_dataset(checkpoint, manifest: DatasetManifest, out_dir, min_area: int | None = None,
                    name: str | None = None) -> DatasetManifest:
    """Predict every frame; writes binary and instance PNGs plus a manifest pointing at the source images."""
    model, ckpt = load_seg_model(checkpoint)
    size = tuple(ckpt["image_size"])
    out_dir = Path(out_dir)
    (out_dir / "binary").mkdir(parents=True, exist_ok=True)
    (out_dir / "instance").mkdir(parents=True, exist_ok=True)
    records = []
    for rec in manifest.frames:
        src = manifest.path(rec.rgb)
        mask, _ = predict_mask(model, io.read_rgb(src), size)
        area = min_area if min_area is not None else default_min_area(*mask.shape)
        inst = extract_instances(mask, area)
        io.write_binary(out_dir / "binary" / f"{rec.id}.png", mask)
        io.write_instance(out_dir / "instance" / f"{rec.id}.png", inst)
        records.append(FrameRecord(id=rec.id, rgb=os.path.relpath(src.resolve(), out_dir.resolve()),
                                   binary=f"binary/{rec.id}.png", instance=f"instance/{rec.id}.png"))
    out = DatasetManifest(
        name=name or f"{manifest.name}-pred", role=manifest.role, frame_count=len(records), frames=records,
        annotations=Annotations(fold_labels=True), params={"source": manifest.name, "min_area": min_area},
        provenance=f"predictions of {Path(checkpoint).name} on {manifest.name}",
    )
    out.save(out_dir / "manifest.json")
    out.base_dir = out_dir
    return out
