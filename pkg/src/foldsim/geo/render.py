"""Perspective z-buffer rasterisation of labelled meshes."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .camera import CameraPose
from .folds import FoldLabeling
from .mesh import TriMesh

NO_HIT = 0.0
NEAR_PLANE = 1e-2  # mm
BASE_COLOR = np.array([0.92, 0.55, 0.48])


@dataclass
class LabelFrame:
    rgb: np.ndarray        # (H, W, 3) float in [0, 1]
    binary: np.ndarray     # (H, W) uint8 in {0, 1}
    instance: np.ndarray   # (H, W) int32
    depth: np.ndarray      # (H, W) float32, NO_HIT where nothing was hit
    pose: CameraPose

    @property
    def hit(self) -> np.ndarray:
        return self.depth > NO_HIT


@numba.njit(cache=True)
def _raster_tri(p, depth, face_id, fid, fx, fy, cx, cy):
    # p: (3, 3) camera-space vertices, all with z >= near
    h, w = depth.shape
    u = np.empty(3)
    v = np.empty(3)
    iz = np.empty(3)
    for k in range(3):
        iz[k] = 1.0 / p[k, 2]
        u[k] = fx * p[k, 0] * iz[k] + cx
        v[k] = fy * p[k, 1] * iz[k] + cy
    area = (u[1] - u[0]) * (v[2] - v[0]) - (u[2] - u[0]) * (v[1] - v[0])
    if abs(area) < 1e-14:
        return
    x0 = max(int(np.floor(min(u[0], u[1], u[2]) - 0.5)), 0)
    x1 = min(int(np.ceil(max(u[0], u[1], u[2]) - 0.5)), w - 1)
    y0 = max(int(np.floor(min(v[0], v[1], v[2]) - 0.5)), 0)
    y1 = min(int(np.ceil(max(v[0], v[1], v[2]) - 0.5)), h - 1)
    inv_area = 1.0 / area
    for y in range(y0, y1 + 1):
        py = y + 0.5
        for x in range(x0, x1 + 1):
            px = x + 0.5
            b0 = ((u[1] - px) * (v[2] - py) - (u[2] - px) * (v[1] - py)) * inv_area
            b1 = ((u[2] - px) * (v[0] - py) - (u[0] - px) * (v[2] - py)) * inv_area
            b2 = 1.0 - b0 - b1
            if b0 < -1e-9 or b1 < -1e-9 or b2 < -1e-9:
                continue
            z = 1.0 / (b0 * iz[0] + b1 * iz[1] + b2 * iz[2])
            cur = depth[y, x]
            if cur == 0.0 or z < cur:
                depth[y, x] = z
                face_id[y, x] = fid


@numba.njit(cache=True)
def _rasterize(cam_verts, faces, h, w, fx, fy, cx, cy, near):
    depth = np.zeros((h, w))
    face_id = np.full((h, w), -1, dtype=np.int64)
    poly = np.empty((4, 3))
    tri = np.empty((3, 3))
    for f in range(faces.shape[0]):
        n_in = 0
        for k in range(3):
            if cam_verts[faces[f, k], 2] >= near:
                n_in += 1
        if n_in == 0:
            continue
        # Sutherland-Hodgman against z = near; a triangle yields at most 4 vertices
        m = 0
        for k in range(3):
            a = cam_verts[faces[f, k]]
            b = cam_verts[faces[f, (k + 1) % 3]]
            a_in = a[2] >= near
            b_in = b[2] >= near
            if a_in:
                poly[m] = a
                m += 1
            if a_in != b_in:
                t = (near - a[2]) / (b[2] - a[2])
                poly[m] = a + t * (b - a)
                poly[m, 2] = near
                m += 1
        for k in range(1, m - 1):
            tri[0] = poly[0]
            tri[1] = poly[k]
            tri[2] = poly[k + 1]
            _raster_tri(tri, depth, face_id, f, fx, fy, cx, cy)
    return depth, face_id


def rasterize(mesh: TriMesh, pose: CameraPose, height: int, width: int, near: float = NEAR_PLANE):
    """Depth along the optical axis (``NO_HIT`` where empty) and visible face index (-1 where empty)."""
    cam = np.ascontiguousarray(pose.world_to_camera(mesh.vertices))
    return _rasterize(cam, mesh.faces, height, width, pose.fx, pose.fy, pose.cx, pose.cy, near)


def face_labels(mesh: TriMesh, labels: FoldLabeling) -> tuple[np.ndarray, np.ndarray]:
    """Majority vertex label per face: binary flag and the instance id carried by its fold vertices."""
    flags = labels.is_fold[mesh.faces]
    binary = flags.sum(axis=1) >= 2
    ids = np.where(flags, labels.instance[mesh.faces], 0)
    # fold vertices of one face share an id (they are edge-connected), so max picks it
    instance = np.where(binary, ids.max(axis=1), 0).astype(np.int32)
    return binary, instance


def shade(depth: np.ndarray, color=BASE_COLOR) -> np.ndarray:
    """Headlight falloff shading ``color * (d_min / d)^2``; black where nothing was hit.

    Luminance is a monotone function of depth within a frame, so depth can be
    recovered from the image up to one scale factor per frame.
    """
    hit = depth > NO_HIT
    rgb = np.zeros(depth.shape + (3,))
    if hit.any():
        d_min = depth[hit].min()
        falloff = np.zeros_like(depth, dtype=np.float64)
        falloff[hit] = (d_min / depth[hit]) ** 2
        rgb = falloff[..., None] * np.asarray(color, dtype=np.float64)
    return np.clip(rgb, 0.0, 1.0)


def render_frame(mesh: TriMesh, labels: FoldLabeling, pose: CameraPose,
                 resolution: tuple[int, int], color=BASE_COLOR) -> LabelFrame:
    """Rasterise one labelled frame at ``resolution = (H, W)``."""
    h, w = resolution
    if h <= 0 or w <= 0:
        raise ValueError("resolution must be positive")
    if len(labels.is_fold) != mesh.n_vertices:
        raise ValueError("labels are not defined on this mesh")
    depth, fid = rasterize(mesh, pose, h, w)
    fb, fi = face_labels(mesh, labels)
    hit = fid >= 0
    binary = np.zeros((h, w), dtype=np.uint8)
    instance = np.zeros((h, w), dtype=np.int32)
    binary[hit] = fb[fid[hit]]
    instance[hit] = fi[fid[hit]]
    return LabelFrame(shade(depth, color), binary, instance, depth.astype(np.float32), pose)
