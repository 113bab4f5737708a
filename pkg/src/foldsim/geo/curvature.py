"""Per-vertex principal curvatures from a local quadric fit.

Sign convention: curvature is positive where the surface bends away from
its normal, so a sphere or the outside of a cylinder (normals pointing out)
has positive curvature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .mesh import TriMesh

UMBILIC_REL_EPS = 0.05
UMBILIC_ABS_EPS = 1e-4


@dataclass
class CurvatureField:
    k1: np.ndarray          # (V,) max principal curvature, 1/mm
    k2: np.ndarray          # (V,) min principal curvature
    e1: np.ndarray          # (V, 3) direction of k1
    e2: np.ndarray          # (V, 3) direction of k2
    normal: np.ndarray      # (V, 3) fitted surface normal
    umbilic: np.ndarray     # (V,) bool, directions meaningless
    valid: np.ndarray       # (V,) bool, False for isolated / under-connected vertices

    @property
    def reliable(self) -> np.ndarray:
        return self.valid & ~self.umbilic

    def __len__(self):
        return len(self.k1)


def _tangent_frame(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Any orthonormal (t1, t2) completing each row of ``n``."""
    helper = np.where(np.abs(n[:, [0]]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
    t1 = np.cross(n, helper)
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(n, t1)
    return t1, t2


def ring_neighborhoods(mesh: TriMesh, rings: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Padded k-ring index table (V, K) and its validity mask, centre excluded."""
    a = mesh.adjacency().astype(np.int32)
    reach = a.copy()
    step = a.copy()
    for _ in range(rings - 1):
        step = step @ a
        reach = reach + step
    reach = (reach > 0).astype(np.int8).tolil()
    reach.setdiag(0)
    reach = sparse.csr_matrix(reach)
    reach.eliminate_zeros()
    counts = np.diff(reach.indptr)
    k = max(int(counts.max(initial=0)), 1)
    idx = np.zeros((mesh.n_vertices, k), dtype=np.int64)
    mask = np.arange(k)[None, :] < counts[:, None]
    idx[mask] = reach.indices
    return idx, mask


def _fit(points: np.ndarray, mask: np.ndarray, origin: np.ndarray, normal: np.ndarray):
    """Weighted LSQ of h = a x^2 + b xy + c y^2 + d x + e y in the frame of ``normal``."""
    t1, t2 = _tangent_frame(normal)
    q = points - origin[:, None, :]
    x = np.einsum("vkj,vj->vk", q, t1)
    y = np.einsum("vkj,vj->vk", q, t2)
    h = np.einsum("vkj,vj->vk", q, normal)
    design = np.stack([x * x, x * y, y * y, x, y], axis=-1)
    w = mask.astype(np.float64)
    # scale columns per vertex so the normal equations stay well conditioned
    scale = np.sqrt((w[..., None] * design ** 2).sum(axis=1)) + 1e-300
    dn = design / scale[:, None, :]
    ata = np.einsum("vki,vk,vkj->vij", dn, w, dn)
    atb = np.einsum("vki,vk,vk->vi", dn, w, h)
    coef = np.linalg.solve(ata + 1e-12 * np.eye(5), atb[..., None])[..., 0] / scale
    return coef, t1, t2


def estimate_curvature(mesh: TriMesh, rings: int = 2, refine: bool = True) -> CurvatureField:
    """Principal curvatures and directions at every vertex.

    A quadric height field is fitted over the ``rings``-ring neighbourhood in the
    tangent plane of the vertex normal. With ``refine`` the fit is repeated in
    the frame of the normal implied by the first fit.

    Vertices with fewer than 3 distinct neighbours (or too few ring points to fit)
    are returned with ``valid=False`` and zero curvature; this never raises.
    """
    idx, mask = ring_neighborhoods(mesh, rings)
    one_ring = np.diff(mesh.adjacency().indptr)
    valid = (one_ring >= 3) & (mask.sum(axis=1) >= 6)
    # keep solver inputs well posed for invalid vertices; results are discarded
    safe_mask = mask.copy()
    safe_mask[~valid] = False

    p = mesh.vertices
    pts = p[idx]
    n = mesh.vertex_normals().copy()
    bad_n = ~np.isfinite(n).all(axis=1) | (np.linalg.norm(n, axis=1) < 0.5)
    n[bad_n] = [0.0, 0.0, 1.0]

    passes = 2 if refine else 1
    for it in range(passes):
        coef, t1, t2 = _fit(pts, safe_mask, p, n)
        coef[~valid] = 0.0
        d, e = coef[:, 3], coef[:, 4]
        fitted_n = (-d[:, None] * t1 - e[:, None] * t2 + n)
        fitted_n /= np.linalg.norm(fitted_n, axis=1, keepdims=True)
        if it < passes - 1:
            n = np.where(valid[:, None], fitted_n, n)

    a2, b, c2 = 2 * coef[:, 0], coef[:, 1], 2 * coef[:, 2]
    w = np.sqrt(1.0 + d * d + e * e)
    first = np.stack([np.stack([1 + d * d, d * e], -1), np.stack([d * e, 1 + e * e], -1)], -2)
    second = np.stack([np.stack([a2, b], -1), np.stack([b, c2], -1)], -2) / w[:, None, None]
    # height is measured along +n, so bending away from n gives a negative second
    # form. Solve -II u = k I u through the symmetric form L^-1 (-II) L^-T, I = L L^T.
    chol = np.linalg.cholesky(first)
    sym = np.linalg.solve(chol, -second)
    sym = np.linalg.solve(chol, np.swapaxes(sym, 1, 2))
    sym = 0.5 * (sym + np.swapaxes(sym, 1, 2))
    evals, evecs = np.linalg.eigh(sym)  # ascending
    k2, k1 = evals[:, 0], evals[:, 1]
    # back to parameter-space directions: u = L^-T v
    u1 = np.linalg.solve(np.swapaxes(chol, 1, 2), evecs[:, :, 1:2])[..., 0]
    tx = t1 + d[:, None] * n
    ty = t2 + e[:, None] * n
    e1 = u1[:, [0]] * tx + u1[:, [1]] * ty
    e1 -= np.einsum("ij,ij->i", e1, fitted_n)[:, None] * fitted_n
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(fitted_n, e1)

    k1 = np.where(valid, k1, 0.0)
    k2 = np.where(valid, k2, 0.0)
    e1[~valid] = t1[~valid]
    e2[~valid] = t2[~valid]
    fitted_n[~valid] = n[~valid]
    spread = np.maximum(np.abs(k1), np.abs(k2))
    umbilic = np.abs(k1 - k2) < np.maximum(UMBILIC_ABS_EPS, UMBILIC_REL_EPS * spread)
    return CurvatureField(k1, k2, e1, e2, fitted_n, umbilic & valid, valid)
