"""Pinhole camera poses and trajectories.

Camera frame follows the OpenCV convention: +z along the optical axis,
+x to the right, +y down. ``orientation`` is the unit quaternion (w, x, y, z)
rotating camera-frame vectors into the world frame.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation


@dataclass(frozen=True)
class CameraPose:
    position: tuple[float, float, float]
    orientation: tuple[float, float, float, float]  # w, x, y, z
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        q = np.asarray(self.orientation, dtype=np.float64)
        if abs(np.linalg.norm(q) - 1.0) > 1e-6:
            raise ValueError("orientation quaternion must have unit norm")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")

    @property
    def rotation(self) -> np.ndarray:
        w, x, y, z = self.orientation
        return Rotation.from_quat([x, y, z, w]).as_matrix()

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points) - np.asarray(self.position)) @ self.rotation

    def as_list(self) -> list[float]:
        """Pose as 7 floats (position, quaternion w x y z)."""
        return [float(v) for v in (*self.position, *self.orientation)]

    def intrinsics(self) -> list[float]:
        return [float(self.fx), float(self.fy), float(self.cx), float(self.cy)]

    @classmethod
    def from_lists(cls, pose, intrinsics) -> "CameraPose":
        q = np.asarray(pose[3:7], dtype=np.float64)
        q = q / np.linalg.norm(q)
        return cls(tuple(float(v) for v in pose[:3]), tuple(float(v) for v in q), *map(float, intrinsics))


def intrinsics_for(width: int, height: int, fov_deg: float = 90.0) -> tuple[float, float, float, float]:
    """Square-pixel intrinsics with the given horizontal field of view."""
    f = 0.5 * width / np.tan(np.radians(fov_deg) / 2)
    return f, f, width / 2.0, height / 2.0


def look_at(position, target, up=(0.0, 1.0, 0.0), intrinsics=(128.0, 128.0, 128.0, 128.0)) -> CameraPose:
    """Pose at ``position`` whose optical axis points at ``target``."""
    position = np.asarray(position, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - position
    forward /= np.linalg.norm(forward)
    up = np.asarray(up, dtype=np.float64)
    if abs(forward @ up) > 0.999 * np.linalg.norm(up):
        up = np.array([1.0, 0.0, 0.0]) if abs(forward[0]) < 0.9 else np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    rot = np.stack([right, down, forward], axis=1)
    x, y, z, w = Rotation.from_matrix(rot).as_quat()
    q = np.array([w, x, y, z])
    if q[0] < 0:
        q = -q
    return CameraPose(tuple(position), tuple(q / np.linalg.norm(q)), *intrinsics)


@dataclass
class Trajectory:
    poses: list[CameraPose]
    fps: float = 50.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.poses:
            raise ValueError("trajectory has no poses")
        if self.fps <= 0:
            raise ValueError("frame rate must be positive")

    def __len__(self):
        return len(self.poses)

    def timestamps(self) -> np.ndarray:
        return np.arange(len(self.poses)) / self.fps


def centerline_trajectory(points, n_frames: int, intrinsics, look_ahead: float = 5.0,
                          up=(0.0, 1.0, 0.0), fps: float = 50.0) -> Trajectory:
    """Poses sampled uniformly by arc length along a polyline, each looking ``look_ahead`` mm ahead."""
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 2:
        raise ValueError("centerline needs at least two points")
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]

    def at(t):
        t = np.clip(t, 0.0, total)
        return np.array([np.interp(t, s, pts[:, k]) for k in range(3)])

    poses = []
    for t in np.linspace(0.0, max(total - look_ahead, 0.0), n_frames):
        pos = at(t)
        ahead = at(t + look_ahead)
        if np.linalg.norm(ahead - pos) < 1e-9:
            ahead = pos + (pts[-1] - pts[-2])
        poses.append(look_at(pos, ahead, up, intrinsics))
    return Trajectory(poses, fps)


def load_trajectory(path: str | os.PathLike, width: int | None = None, height: int | None = None) -> Trajectory:
    """Read a trajectory JSON file.

    Two layouts are accepted::

        {"fps": 50, "poses": [{"pose": [px, py, pz, qw, qx, qy, qz],
                               "intrinsics": [fx, fy, cx, cy]}, ...]}

        {"fps": 50, "centerline": [[x, y, z], ...], "n_frames": 100,
         "look_ahead": 5.0, "fov_deg": 90}

    Centerline intrinsics come from ``fov_deg`` and the target resolution.
    """
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    fps = float(data.get("fps", 50.0))
    if "poses" in data:
        poses = [CameraPose.from_lists(p["pose"], p["intrinsics"]) for p in data["poses"]]
        return Trajectory(poses, fps)
    if "centerline" in data:
        w = width or int(data.get("width", 256))
        h = height or int(data.get("height", 256))
        intr = intrinsics_for(w, h, float(data.get("fov_deg", 90.0)))
        return centerline_trajectory(data["centerline"], int(data["n_frames"]), intr,
                                     float(data.get("look_ahead", 5.0)), tuple(data.get("up", (0.0, 1.0, 0.0))), fps)
    raise ValueError(f"{path}: trajectory needs 'poses' or 'centerline'")


def save_trajectory(traj: Trajectory, path: str | os.PathLike) -> None:
    data = {"fps": traj.fps,
            "poses": [{"pose": p.as_list(), "intrinsics": p.intrinsics()} for p in traj.poses]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1)
