"""Render a labelled frame sequence to disk and index it in a manifest."""

from __future__ import annotations

import logging
from pathlib import Path

from .. import io
from ..manifest import Annotations, DatasetManifest, FrameRecord
from .camera import Trajectory
from .folds import FoldLabeling
from .mesh import TriMesh
from .render import LabelFrame, render_frame

logger = logging.getLogger(__name__)


def write_frame(out_dir: Path, frame_id: str, frame: LabelFrame) -> FrameRecord:
    rel = {
        "rgb": f"rgb/{frame_id}.png",
        "binary": f"binary/{frame_id}.png",
        "instance": f"instance/{frame_id}.png",
        "depth": f"depth/{frame_id}.pfm",
    }
    for sub in ("rgb", "binary", "instance", "depth"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    io.write_rgb(out_dir / rel["rgb"], frame.rgb)
    io.write_binary(out_dir / rel["binary"], frame.binary)
    io.write_instance(out_dir / rel["instance"], frame.instance)
    io.write_pfm(out_dir / rel["depth"], frame.depth)
    return FrameRecord(id=frame_id, pose=frame.pose.as_list(), intrinsics=frame.pose.intrinsics(), **rel)


def generate_dataset(mesh: TriMesh, labels: FoldLabeling, trajectory: Trajectory,
                     resolution: tuple[int, int], out_dir, name: str = "Sim",
                     role: str = "train", params: dict | None = None,
                     id_prefix: str = "") -> DatasetManifest:
    """Render one frame per trajectory pose into ``out_dir`` and write ``manifest.json``.

    Four files are written per frame (rgb, binary, instance, depth).
    """
    if len(trajectory) == 0:
        raise ValueError("trajectory is empty")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out_dir} is not writable: {exc}") from exc

    records = []
    for i, pose in enumerate(trajectory.poses):
        frame = render_frame(mesh, labels, pose, resolution)
        records.append(write_frame(out_dir, f"{id_prefix}{i:06d}", frame))
    manifest = DatasetManifest(
        name=name, role=role, split=f"{name}-{role}", frame_count=len(records), frames=records,
        fps=trajectory.fps,
        annotations=Annotations(fold_labels=True, depth=True),
        params={"height": resolution[0], "width": resolution[1], **(params or {})},
        provenance="rendered from mesh with curvature-based fold labels",
    )
    manifest.save(out_dir / "manifest.json")
    manifest.base_dir = out_dir
    logger.info("wrote %d frames to %s", len(records), out_dir)
    return manifest
