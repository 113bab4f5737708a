"""Desk-scale stand-in for the simulated/real domain pair.

Simulated frames come straight from the renderer, whose shading darkens with
depth. The "real" domain is rendered from other viewpoints of the same tube and
restyled so that brightness *rises* with depth, with a tint and a mottled
texture. A translator that only matches appearance is therefore pulled towards
inverting the depth ordering, which is exactly what the depth-consistency term
is meant to prevent.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from scipy.ndimage import gaussian_filter

from .. import io
from ..geo import FoldLabeling, TriMesh, intrinsics_for, look_at, render_frame
from ..geo.render import LabelFrame
from ..manifest import Annotations, DatasetManifest, FrameRecord
from .losses import structure_mask

REAL_TINT = np.array([0.85, 0.42, 0.38])


def random_poses(n: int, size: int, seed: int, length: float = 60.0, fov_deg: float = 100.0):
    """Cameras inside the tube looking roughly down its axis."""
    rng = np.random.default_rng(seed)
    intr = intrinsics_for(size, size, fov_deg)
    poses = []
    for _ in range(n):
        z = rng.uniform(0.5, length * 0.6)
        pos = np.array([*rng.uniform(-3.0, 3.0, 2), z])
        target = np.array([*rng.uniform(-4.0, 4.0, 2), z + 20.0])
        ang = rng.uniform(0, 2 * np.pi)
        poses.append(look_at(pos, target, (np.cos(ang), np.sin(ang), 0.0), intr))
    return poses


def realistic_style(frame: LabelFrame, seed: int) -> np.ndarray:
    """Restyle a rendered frame: depth-increasing brightness, tint and smooth texture."""
    rng = np.random.default_rng(seed)
    hit = frame.hit
    out = np.zeros(frame.rgb.shape)
    if not hit.any():
        return out
    d = frame.depth.astype(np.float64)
    near = (d[hit].min() / np.where(hit, d, np.inf)) ** 2
    lum = 0.25 + 0.7 * (1.0 - near)
    tex = gaussian_filter(rng.standard_normal(d.shape), 1.0)
    lum = lum * (1.0 + 0.25 * tex / (np.abs(tex).max() + 1e-12))
    out = np.clip(lum[..., None] * REAL_TINT, 0.0, 1.0)
    out[~hit] = 0.0
    return out


@dataclass
class ToyDomains:
    sim: torch.Tensor        # (N, 3, H, W) in [-1, 1]
    depth: torch.Tensor      # (N, H, W), 0 where nothing was hit
    binary: np.ndarray       # (N, H, W) fold labels of the simulated frames
    real: torch.Tensor       # (M, 3, H, W) in [-1, 1]


def _to_tensor(images) -> torch.Tensor:
    return torch.from_numpy(np.stack(images).astype(np.float32)).permute(0, 3, 1, 2).contiguous() * 2.0 - 1.0


def toy_domains(mesh: TriMesh, labels: FoldLabeling, n_frames: int = 64, size: int = 16,
                seed: int = 0) -> ToyDomains:
    """Render ``n_frames`` simulated and ``n_frames`` unpaired realistic frames."""
    sim_frames = [render_frame(mesh, labels, p, (size, size)) for p in random_poses(n_frames, size, seed)]
    real_frames = [render_frame(mesh, labels, p, (size, size)) for p in random_poses(n_frames, size, seed + 10_000)]
    real = [realistic_style(f, seed + i) for i, f in enumerate(real_frames)]
    return ToyDomains(
        sim=_to_tensor([f.rgb for f in sim_frames]),
        depth=torch.from_numpy(np.stack([f.depth for f in sim_frames]).astype(np.float32)),
        binary=np.stack([f.binary for f in sim_frames]),
        real=_to_tensor(real),
    )


@torch.no_grad()
def structure_iou(G, oracle, images: torch.Tensor, depth: torch.Tensor) -> np.ndarray:
    """Per-frame IoU between the near-half layout mask of the ground truth and of ``oracle(G(x))``."""
    pred = oracle(G(images)).numpy()
    gt = depth.numpy()
    out = []
    for p, d in zip(pred, gt):
        valid = d > 0
        a, b = structure_mask(d, valid), structure_mask(p, valid)
        union = (a | b).sum()
        out.append(1.0 if union == 0 else (a & b).sum() / union)
    return np.asarray(out)


def generate_real_dataset(mesh: TriMesh, labels: FoldLabeling, poses, size: int, out_dir, name: str = "Real",
                          role: str = "train", labelled: bool = False, seed: int = 0):
    """Write restyled frames with a manifest; labels and depth are kept only when ``labelled``."""
    out_dir = Path(out_dir)
    (out_dir / "rgb").mkdir(parents=True, exist_ok=True)
    records = []
    for i, pose in enumerate(poses):
        frame = render_frame(mesh, labels, pose, (size, size))
        fid = f"{i:06d}"
        io.write_rgb(out_dir / "rgb" / f"{fid}.png", realistic_style(frame, seed + i))
        files = {"rgb": f"rgb/{fid}.png"}
        if labelled:
            for sub in ("binary", "instance"):
                (out_dir / sub).mkdir(exist_ok=True)
            io.write_binary(out_dir / "binary" / f"{fid}.png", frame.binary)
            io.write_instance(out_dir / "instance" / f"{fid}.png", frame.instance)
            files.update(binary=f"binary/{fid}.png", instance=f"instance/{fid}.png")
        records.append(FrameRecord(id=fid, pose=pose.as_list(), intrinsics=pose.intrinsics(), **files))
    manifest = DatasetManifest(
        name=name, role=role, split=f"{name}-{role}", frame_count=len(records), frames=records,
        annotations=Annotations(fold_labels=labelled), params={"height": size, "width": size, "seed": seed},
        provenance="toy realistic domain: restyled renders with depth-increasing brightness",
    )
    manifest.save(out_dir / "manifest.json")
    manifest.base_dir = out_dir
    return manifest
