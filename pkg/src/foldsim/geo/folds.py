"""Fold labelling from changes of the principal direction field."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .curvature import CurvatureField
from .mesh import TriMesh


@dataclass(frozen=True)
class FoldParams:
    direction_threshold: float = 0.15   # on the mean 1 - |e1(v).e1(u)| score
    curvature_threshold: float = 0.25   # 1/mm, on k1
    min_size: int = 20                  # vertices per instance
    closing_rings: int = 2              # graph closing radius joining fold flanks to their crest


@dataclass
class FoldLabeling:
    is_fold: np.ndarray    # (V,) bool
    instance: np.ndarray   # (V,) int32, 0 = background, 1..K folds

    @property
    def n_instances(self) -> int:
        return int(self.instance.max(initial=0))


def transport(vectors: np.ndarray, n_from: np.ndarray, n_to: np.ndarray) -> np.ndarray:
    """Rotate tangent ``vectors`` by the minimal rotation taking ``n_from`` onto ``n_to``."""
    axis = np.cross(n_from, n_to)
    s = np.linalg.norm(axis, axis=1, keepdims=True)
    c = np.einsum("ij,ij->i", n_from, n_to)[:, None]
    k = np.divide(axis, s, out=np.zeros_like(axis), where=s > 1e-12)
    # Rodrigues with sin = s, cos = c
    kv = np.cross(k, vectors)
    kdot = np.einsum("ij,ij->i", k, vectors)[:, None]
    out = vectors * c + kv * s + k * kdot * (1.0 - c)
    # project out numerical drift off the target plane
    out -= np.einsum("ij,ij->i", out, n_to)[:, None] * n_to
    norm = np.linalg.norm(out, axis=1, keepdims=True)
    return np.divide(out, norm, out=np.zeros_like(out), where=norm > 0)


def direction_change_score(mesh: TriMesh, field: CurvatureField) -> np.ndarray:
    """Mean over reliable 1-ring neighbours of ``1 - |e1(v) . T(e1(u))|``.

    ``T`` transports the neighbour direction into the tangent plane of ``v``.
    Unreliable neighbours (umbilic or invalid) do not contribute; a vertex with
    no reliable neighbour scores 0.
    """
    adj = mesh.adjacency().tocoo()
    v, u = adj.row, adj.col
    moved = transport(field.e1[u], field.normal[u], field.normal[v])
    term = 1.0 - np.abs(np.einsum("ij,ij->i", field.e1[v], moved))
    w = field.reliable[u].astype(np.float64)
    total = np.bincount(v, weights=term * w, minlength=mesh.n_vertices)
    count = np.bincount(v, weights=w, minlength=mesh.n_vertices)
    return np.divide(total, count, out=np.zeros_like(total), where=count > 0)


def close_on_graph(mesh: TriMesh, flags: np.ndarray, rings: int) -> np.ndarray:
    """Morphological closing (``rings`` dilations then as many erosions) on the edge graph."""
    adj = mesh.adjacency()
    out = np.asarray(flags, dtype=bool).copy()
    for _ in range(rings):
        out = out | (adj @ out.astype(np.int32) > 0)
    for _ in range(rings):
        out = out & (adj @ (~out).astype(np.int32) == 0)
    return out


def label_components(mesh: TriMesh, is_fold: np.ndarray, min_size: int) -> FoldLabeling:
    """Connected components of the fold subgraph, ids 1..K ordered by lowest vertex index."""
    is_fold = np.asarray(is_fold, dtype=bool)
    adj = mesh.adjacency().tocsr()
    sub = adj[is_fold][:, is_fold]
    n_comp, comp = connected_components(sub, directed=False)
    sizes = np.bincount(comp, minlength=n_comp)
    keep = sizes >= min_size
    # components are numbered by first appearance in vertex order, so this is deterministic
    new_id = np.zeros(n_comp, dtype=np.int32)
    new_id[keep] = np.arange(1, int(keep.sum()) + 1, dtype=np.int32)
    instance = np.zeros(mesh.n_vertices, dtype=np.int32)
    instance[np.flatnonzero(is_fold)] = new_id[comp]
    return FoldLabeling(instance > 0, instance)


def detect_folds(mesh: TriMesh, field: CurvatureField, params: FoldParams = FoldParams()) -> FoldLabeling:
    """Flag vertices whose principal direction turns sharply or whose k1 is high.

    Umbilic and invalid vertices never seed a fold. The direction field flips on
    both flanks of a ridge while k1 peaks on its crest, so the seeds are closed
    over ``params.closing_rings`` rings to merge flanks and crest into one band.
    Components smaller than ``params.min_size`` are dropped and the remaining
    ids renumbered 1..K.
    """
    if len(field) != mesh.n_vertices:
        raise ValueError("curvature field was computed on a different mesh")
    score = direction_change_score(mesh, field)
    flag = (score > params.direction_threshold) | (field.k1 > params.curvature_threshold)
    flag &= field.reliable
    if params.closing_rings > 0:
        flag = close_on_graph(mesh, flag, params.closing_rings)
    return label_components(mesh, flag, params.min_size)
