"""Analytic meshes with known curvature, used for calibration and toy datasets."""

from __future__ import annotations

import numpy as np

from .mesh import TriMesh


def _grid_faces(n_u: int, n_v: int, wrap_u: bool, wrap_v: bool) -> np.ndarray:
    """Two triangles per grid cell; u runs first so (u, v) -> index u + n_u * v."""
    faces = []
    nu = n_u if wrap_u else n_u - 1
    nv = n_v if wrap_v else n_v - 1
    for j in range(nv):
        for i in range(nu):
            a = i + n_u * j
            b = (i + 1) % n_u + n_u * j
            c = i + n_u * ((j + 1) % n_v)
            d = (i + 1) % n_u + n_u * ((j + 1) % n_v)
            faces.append((a, b, d))
            faces.append((a, d, c))
    return np.array(faces, dtype=np.int64)


def surface_of_revolution(radius_fn, length: float, n_theta: int = 64, n_z: int = 80) -> TriMesh:
    """Open tube around the z axis with radius ``radius_fn(z)`` for z in [0, length].

    Faces are wound so normals point away from the axis.
    """
    theta = np.linspace(0.0, 2 * np.pi, n_theta, endpoint=False)
    z = np.linspace(0.0, length, n_z)
    tt, zz = np.meshgrid(theta, z)  # rows are z slices
    r = radius_fn(zz)
    verts = np.stack([r * np.cos(tt), r * np.sin(tt), zz], axis=-1).reshape(-1, 3)
    return TriMesh(verts, _grid_faces(n_theta, n_z, wrap_u=True, wrap_v=False))


def cylinder(radius: float = 10.0, length: float = 40.0, n_theta: int = 64, n_z: int = 80) -> TriMesh:
    return surface_of_revolution(lambda z: np.full_like(z, radius), length, n_theta, n_z)


def bumpy_cylinder_radius(z, base: float = 10.0, amplitude: float = 2.0,
                          length: float = 60.0, n_bumps: int = 5):
    return base + amplitude * np.sin(2 * np.pi * np.asarray(z) / length * n_bumps)


def bumpy_cylinder(base: float = 10.0, amplitude: float = 2.0, length: float = 60.0,
                   n_bumps: int = 5, n_theta: int = 72, n_z: int = 301) -> TriMesh:
    """Tube with ``n_bumps`` sinusoidal radial bulges along its axis."""
    return surface_of_revolution(
        lambda z: bumpy_cylinder_radius(z, base, amplitude, length, n_bumps), length, n_theta, n_z)


def crest_positions(length: float = 60.0, n_bumps: int = 5) -> np.ndarray:
    """z of the radius maxima of :func:`bumpy_cylinder_radius`."""
    period = length / n_bumps
    return period * (np.arange(n_bumps) + 0.25)


def torus(major: float = 20.0, minor: float = 5.0, n_major: int = 100, n_minor: int = 50) -> TriMesh:
    theta = np.linspace(0.0, 2 * np.pi, n_major, endpoint=False)
    phi = np.linspace(0.0, 2 * np.pi, n_minor, endpoint=False)
    tt, pp = np.meshgrid(theta, phi)
    ring = major + minor * np.cos(pp)
    verts = np.stack([ring * np.cos(tt), ring * np.sin(tt), minor * np.sin(pp)], axis=-1).reshape(-1, 3)
    return TriMesh(verts, _grid_faces(n_major, n_minor, wrap_u=True, wrap_v=True))


def icosphere(radius: float = 1.0, subdivisions: int = 4) -> TriMesh:
    """Geodesic sphere from a subdivided icosahedron, outward wound."""
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
             (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
             (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
             (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(v, dtype=np.float64) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    v = np.array(verts) * radius
    f = np.array(faces, dtype=np.int64)
    c = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    flip = np.einsum("ij,ij->i", c, v[f].mean(axis=1)) < 0
    f[flip] = f[flip][:, ::-1]
    return TriMesh(v, f)


def plane(z: float = 100.0, half_size: float = 500.0, n: int = 21) -> TriMesh:
    """Square grid in the plane ``z = const`` facing -z (towards a camera at the origin)."""
    s = np.linspace(-half_size, half_size, n)
    xx, yy = np.meshgrid(s, s)
    verts = np.stack([xx, yy, np.full_like(xx, z)], axis=-1).reshape(-1, 3)
    faces = _grid_faces(n, n, wrap_u=False, wrap_v=False)
    return TriMesh(verts, faces[:, ::-1].copy())


BUILTIN_SHAPES = {
    "bumpy_cylinder": bumpy_cylinder,
    "cylinder": cylinder,
    "torus": torus,
    "sphere": lambda: icosphere(10.0, 4),
}
