"""Triangle mesh container and OBJ / binary PLY readers and writers."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

logger = logging.getLogger(__name__)

AREA_EPS = 1e-12


class MeshFormatError(ValueError):
    """Raised when a mesh file cannot be parsed or holds no usable faces."""


@dataclass
class TriMesh:
    """Triangle mesh in millimetres.

    Parameters
    ----------
    vertices : ndarray (V, 3)
        Vertex positions.
    faces : ndarray (F, 3)
        Vertex indices per triangle, counter-clockwise seen from the side the
        normal points to.
    normals : ndarray (V, 3) or None
        Optional unit per-vertex normals.
    dropped_faces : int
        Number of degenerate faces removed while loading.
    """

    vertices: np.ndarray
    faces: np.ndarray
    normals: np.ndarray | None = None
    dropped_faces: int = 0
    _adjacency: sparse.csr_matrix | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError("vertices must have shape (V, 3)")
        if self.normals is not None:
            self.normals = np.ascontiguousarray(self.normals, dtype=np.float64)
            if self.normals.shape != self.vertices.shape:
                raise ValueError("normals must match vertices in shape")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self._face_cross(), axis=1)

    def _face_cross(self) -> np.ndarray:
        v0, v1, v2 = (self.vertices[self.faces[:, i]] for i in range(3))
        return np.cross(v1 - v0, v2 - v0)

    def face_normals(self) -> np.ndarray:
        c = self._face_cross()
        return c / np.linalg.norm(c, axis=1, keepdims=True)

    def vertex_normals(self) -> np.ndarray:
        """Stored normals if present, else area-weighted face normals."""
        if self.normals is not None:
            return self.normals
        acc = np.zeros_like(self.vertices)
        c = self._face_cross()
        for i in range(3):
            np.add.at(acc, self.faces[:, i], c)
        norm = np.linalg.norm(acc, axis=1, keepdims=True)
        norm[norm == 0] = 1.0
        return acc / norm

    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric vertex adjacency matrix of the edge graph."""
        if self._adjacency is None:
            f = self.faces
            i = np.concatenate([f[:, 0], f[:, 1], f[:, 2]])
            j = np.concatenate([f[:, 1], f[:, 2], f[:, 0]])
            n = self.n_vertices
            a = sparse.coo_matrix((np.ones(len(i)), (i, j)), shape=(n, n)).tocsr()
            a = ((a + a.T) > 0).astype(np.int8).tocsr()
            a.setdiag(0)
            a.eliminate_zeros()
            self._adjacency = a
        return self._adjacency

    def neighbors(self, v: int) -> np.ndarray:
        a = self.adjacency()
        return a.indices[a.indptr[v]:a.indptr[v + 1]]

    def boundary_vertices(self) -> np.ndarray:
        """Boolean mask of vertices on an open boundary (edges used by one face)."""
        f = self.faces
        edges = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]), axis=1)
        uniq, counts = np.unique(edges, axis=0, return_counts=True)
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[uniq[counts == 1].ravel()] = True
        return mask

    def transformed(self, rotation: np.ndarray, translation=(0.0, 0.0, 0.0)) -> "TriMesh":
        """Copy of the mesh under the rigid motion ``x -> R x + t``."""
        rotation = np.asarray(rotation, dtype=np.float64)
        normals = None if self.normals is None else self.normals @ rotation.T
        return TriMesh(self.vertices @ rotation.T + np.asarray(translation), self.faces.copy(), normals)

    def validate(self) -> None:
        """Raise ``ValueError`` if any TriMesh invariant is violated."""
        f = self.faces
        if f.size and (f.min() < 0 or f.max() >= self.n_vertices):
            raise ValueError("face index out of range")
        if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise ValueError("face repeats a vertex")
        if np.any(self.face_areas() <= AREA_EPS):
            raise ValueError("zero-area face")
        if self.normals is not None:
            if not np.allclose(np.linalg.norm(self.normals, axis=1), 1.0, atol=1e-6):
                raise ValueError("normals are not unit length")


def clean_faces(vertices: np.ndarray, faces: np.ndarray) -> tuple[np.ndarray, int]:
    """Drop faces that repeat a vertex or have area <= AREA_EPS."""
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
        raise MeshFormatError("face references a vertex that does not exist")
    repeat = (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])
    v0, v1, v2 = (vertices[faces[:, i]] for i in range(3))
    area = 0.5 * np.linalg.norm(np.cross(v1 - v0, v2 - v0), axis=1)
    keep = ~repeat & (area > AREA_EPS)
    return faces[keep], int((~keep).sum())


def _finish(vertices, faces, normals, path) -> TriMesh:
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    faces, dropped = clean_faces(vertices, faces)
    if len(faces) == 0:
        raise MeshFormatError(f"{path}: mesh has no valid faces")
    if dropped:
        logger.warning("%s: dropped %d degenerate face(s)", path, dropped)
    if normals is not None:
        normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
        if len(normals) != len(vertices):
            normals = None
        else:
            norm = np.linalg.norm(normals, axis=1, keepdims=True)
            normals = None if np.any(norm == 0) else normals / norm
    return TriMesh(vertices, faces, normals, dropped_faces=dropped)


def load_mesh(path: str | os.PathLike) -> TriMesh:
    """Read an OBJ or binary little-endian PLY file.

    Degenerate faces are dropped and counted in ``TriMesh.dropped_faces``.
    """
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            head = fh.read(4)
    except OSError as exc:
        raise MeshFormatError(f"cannot read {path}: {exc}") from exc
    ext = os.path.splitext(path)[1].lower()
    if head.startswith(b"ply"):
        return _read_ply(path)
    if ext == ".obj":
        return _read_obj(path)
    raise MeshFormatError(f"{path}: unsupported mesh format")


def _read_obj(path: str) -> TriMesh:
    verts, norms, faces = [], [], []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            try:
                if parts[0] == "v":
                    verts.append([float(x) for x in parts[1:4]])
                elif parts[0] == "vn":
                    norms.append([float(x) for x in parts[1:4]])
                elif parts[0] == "f":
                    idx = []
                    for tok in parts[1:]:
                        k = int(tok.split("/")[0])
                        idx.append(k - 1 if k > 0 else len(verts) + k)
                    if len(idx) < 3:
                        raise ValueError("face with fewer than 3 vertices")
                    for t in range(1, len(idx) - 1):
                        faces.append([idx[0], idx[t], idx[t + 1]])
            except (ValueError, IndexError) as exc:
                raise MeshFormatError(f"{path}:{lineno}: {exc}") from exc
    if not verts:
        raise MeshFormatError(f"{path}: no vertices")
    return _finish(verts, faces, norms or None, path)


_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _read_ply(path: str) -> TriMesh:
    with open(path, "rb") as fh:
        data = fh.read()
    end = data.find(b"end_header")
    if end < 0:
        raise MeshFormatError(f"{path}: truncated PLY header")
    nl = data.find(b"\n", end)
    if nl < 0:
        raise MeshFormatError(f"{path}: truncated PLY header")
    header = data[:end].decode("ascii", errors="replace").splitlines()
    body = data[nl + 1:]

    fmt = None
    elements: list[tuple[str, int, list]] = []
    for line in header[1:]:
        tok = line.split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "format":
            fmt = tok[1]
        elif tok[0] == "element":
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise MeshFormatError(f"{path}: property before element")
            if tok[1] == "list":
                elements[-1][2].append(("list", tok[2], tok[3], tok[4]))
            else:
                elements[-1][2].append(("scalar", tok[1], tok[2]))
    if fmt != "binary_little_endian":
        raise MeshFormatError(f"{path}: only binary_little_endian PLY is supported (got {fmt})")

    offset = 0
    verts = normals = None
    faces = None
    try:
        for name, count, props in elements:
            if all(p[0] == "scalar" for p in props):
                dt = np.dtype([(p[2], "<" + _PLY_TYPES[p[1]]) for p in props])
                arr = np.frombuffer(body, dtype=dt, count=count, offset=offset)
                offset += dt.itemsize * count
                if name == "vertex":
                    verts = np.stack([arr["x"], arr["y"], arr["z"]], axis=1).astype(np.float64)
                    if {"nx", "ny", "nz"} <= set(arr.dtype.names):
                        normals = np.stack([arr["nx"], arr["ny"], arr["nz"]], axis=1).astype(np.float64)
            elif name == "face" and len(props) == 1:
                _, ctype, itype, _ = props[0]
                cdt = np.dtype("<" + _PLY_TYPES[ctype])
                idt = np.dtype("<" + _PLY_TYPES[itype])
                tris = []
                for _ in range(count):
                    n = int(np.frombuffer(body, cdt, 1, offset)[0])
                    offset += cdt.itemsize
                    idx = np.frombuffer(body, idt, n, offset).astype(np.int64)
                    offset += idt.itemsize * n
                    for t in range(1, n - 1):
                        tris.append((idx[0], idx[t], idx[t + 1]))
                faces = np.array(tris, dtype=np.int64).reshape(-1, 3)
            else:
                raise MeshFormatError(f"{path}: unsupported PLY element layout '{name}'")
    except (ValueError, KeyError) as exc:
        raise MeshFormatError(f"{path}: malformed PLY body: {exc}") from exc
    if verts is None or faces is None:
        raise MeshFormatError(f"{path}: PLY needs vertex and face elements")
    return _finish(verts, faces, normals, path)


def save_obj(mesh: TriMesh, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for f in mesh.faces + 1:
            fh.write(f"f {f[0]} {f[1]} {f[2]}\n")


def save_ply(mesh: TriMesh, path: str | os.PathLike) -> None:
    header = (
        "ply\nformat binary_little_endian 1.0\n"
        f"element vertex {mesh.n_vertices}\n"
        "property float x\nproperty float y\nproperty float z\n"
        f"element face {mesh.n_faces}\n"
        "property list uchar int vertex_indices\nend_header\n"
    )
    face_dt = np.dtype([("n", "u1"), ("idx", "<i4", (3,))])
    faces = np.empty(mesh.n_faces, dtype=face_dt)
    faces["n"] = 3
    faces["idx"] = mesh.faces
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(mesh.vertices.astype("<f4").tobytes())
        fh.write(faces.tobytes())
