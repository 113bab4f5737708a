import json

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

import oracles
from foldsim import io
from foldsim.geo import (
    FoldParams, MeshFormatError, TriMesh, Trajectory, detect_folds, estimate_curvature,
    generate_dataset, intrinsics_for, load_mesh, load_trajectory, look_at, render_frame, shapes,
)
from foldsim.geo.camera import CameraPose, centerline_trajectory, save_trajectory
from foldsim.geo.folds import FoldLabeling, label_components
from foldsim.geo.mesh import save_obj, save_ply
from foldsim.manifest import load_manifest


# --- mesh loading -----------------------------------------------------------

def test_cube_obj(cube_obj):
    mesh = load_mesh(cube_obj)
    assert (mesh.n_vertices, mesh.n_faces, mesh.dropped_faces) == (8, 12, 0)
    mesh.validate()


def test_degenerate_face_dropped(tmp_path, caplog):
    from conftest import CUBE_OBJ
    lines = CUBE_OBJ.splitlines()
    # 9th vertex on the midpoint of edge 1-2 makes face (1, 9, 2) collinear
    text = "\n".join(lines[:8] + ["v 0.5 0 0"] + lines[8:19] + ["f 1 9 2"]) + "\n"
    path = tmp_path / "degen.obj"
    path.write_text(text)
    mesh = load_mesh(path)
    assert mesh.n_faces == 11
    assert mesh.dropped_faces == 1
    assert "dropped 1 degenerate" in caplog.text


def test_truncated_ply_header(tmp_path):
    path = tmp_path / "bad.ply"
    path.write_bytes(b"ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty float x\n")
    with pytest.raises(MeshFormatError):
        load_mesh(path)


def test_ascii_ply_rejected(tmp_path):
    path = tmp_path / "ascii.ply"
    path.write_bytes(b"ply\nformat ascii 1.0\nelement vertex 0\nend_header\n")
    with pytest.raises(MeshFormatError, match="binary_little_endian"):
        load_mesh(path)


def test_no_valid_faces(tmp_path):
    path = tmp_path / "flat.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n")
    with pytest.raises(MeshFormatError, match="no valid faces"):
        load_mesh(path)


def test_missing_file(tmp_path):
    with pytest.raises(MeshFormatError):
        load_mesh(tmp_path / "nope.obj")


def test_unsupported_extension(tmp_path):
    path = tmp_path / "mesh.stl"
    path.write_text("solid x\n")
    with pytest.raises(MeshFormatError, match="unsupported"):
        load_mesh(path)


def test_ply_roundtrip(tmp_path):
    mesh = shapes.torus(n_major=20, n_minor=10)
    save_ply(mesh, tmp_path / "t.ply")
    back = load_mesh(tmp_path / "t.ply")
    np.testing.assert_array_equal(back.faces, mesh.faces)
    np.testing.assert_allclose(back.vertices, mesh.vertices, atol=1e-5)


def test_obj_polygons_and_slashes(tmp_path):
    path = tmp_path / "quad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 2\nvn 0 0 2\nvn 0 0 2\nvn 0 0 2\nf 1//1 2//2 3//3 4//4\n")
    mesh = load_mesh(path)
    assert mesh.n_faces == 2
    np.testing.assert_allclose(np.linalg.norm(mesh.normals, axis=1), 1.0)


# --- curvature --------------------------------------------------------------

def test_cylinder_curvature():
    mesh = shapes.cylinder(radius=10.0)
    f = estimate_curvature(mesh)
    inner = ~mesh.boundary_vertices()
    np.testing.assert_allclose(f.k1[inner], 0.1, rtol=0.05)
    assert np.all(np.abs(f.k2[inner]) < 0.005)
    v = mesh.vertices
    circ = np.stack([-v[:, 1], v[:, 0], np.zeros(len(v))], axis=1)
    circ /= np.linalg.norm(circ, axis=1, keepdims=True)
    assert np.all(np.abs(np.einsum("ij,ij->i", f.e1, circ))[inner] > 0.999)
    assert not f.umbilic[inner].any()


def test_sphere_is_umbilic():
    mesh = shapes.icosphere(1.0, subdivisions=5)
    f = estimate_curvature(mesh)
    np.testing.assert_allclose(f.k1, 1.0, rtol=0.05)
    np.testing.assert_allclose(f.k2, 1.0, rtol=0.05)
    assert f.umbilic.mean() >= 0.99


def test_torus_curvature_against_closed_form():
    mesh = shapes.torus(20.0, 5.0)
    f = estimate_curvature(mesh)
    k1, k2 = oracles.torus_curvatures(mesh.vertices)
    np.testing.assert_allclose(f.k1, k1, rtol=0.1, atol=2e-3)
    np.testing.assert_allclose(f.k2, k2, rtol=0.1, atol=2e-3)
    rho = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1])
    outer = np.isclose(mesh.vertices[:, 2], 0.0, atol=1e-9) & (rho > 24.0)
    assert outer.sum() == 100
    np.testing.assert_allclose(f.k2[outer], 1.0 / 25.0, rtol=0.1)


def test_frame_orthonormal():
    for mesh in (shapes.torus(), shapes.bumpy_cylinder(n_z=121, n_theta=48)):
        f = estimate_curvature(mesh)
        for a in (f.e1, f.e2, f.normal):
            np.testing.assert_allclose(np.linalg.norm(a, axis=1), 1.0, atol=1e-6)
        for a, b in ((f.e1, f.e2), (f.e1, f.normal), (f.e2, f.normal)):
            assert np.abs(np.einsum("ij,ij->i", a, b)).max() < 1e-3
        assert np.all(f.k1 >= f.k2)


def test_rigid_motion_equivariance():
    mesh = shapes.torus(n_major=60, n_minor=30)
    rot = Rotation.from_euler("xyz", [0.3, -1.1, 2.0]).as_matrix()
    moved = mesh.transformed(rot, (5.0, -3.0, 12.0))
    a, b = estimate_curvature(mesh), estimate_curvature(moved)
    np.testing.assert_allclose(b.k1, a.k1, atol=1e-6)
    np.testing.assert_allclose(b.k2, a.k2, atol=1e-6)
    ok = a.reliable
    align = np.abs(np.einsum("ij,ij->i", b.e1, a.e1 @ rot.T))
    assert np.all(align[ok] > 1 - 1e-3)


def test_isolated_vertices_flagged():
    mesh = shapes.cylinder(n_theta=16, n_z=10)
    verts = np.vstack([mesh.vertices, [[100.0, 0, 0], [101.0, 0, 0]]])
    lonely = TriMesh(verts, mesh.faces)
    f = estimate_curvature(lonely)
    assert not f.valid[-1] and not f.valid[-2]
    labels = detect_folds(lonely, f)
    assert not labels.is_fold[-2:].any()


# --- fold detection ---------------------------------------------------------

def test_smooth_cylinder_has_no_folds():
    mesh = shapes.cylinder()
    labels = detect_folds(mesh, estimate_curvature(mesh))
    assert labels.n_instances == 0
    assert not labels.is_fold.any()


def test_five_bumps_five_rings(bumpy):
    mesh, _, labels = bumpy
    assert labels.n_instances == 5
    z = mesh.vertices[:, 2]
    crests = shapes.crest_positions()
    theta = np.arctan2(mesh.vertices[:, 1], mesh.vertices[:, 0])
    for k in range(1, 6):
        sel = labels.instance == k
        zk = z[sel]
        width = zk.max() - zk.min()
        assert np.min(np.abs(crests - zk.mean())) <= width
        # ring-shaped: covers the full circumference
        assert np.unique(np.round(theta[sel], 6)).size == 72
    assert sorted(np.unique(labels.instance)) == list(range(6))


def test_labeling_invariants(bumpy):
    mesh, _, labels = bumpy
    assert np.array_equal(labels.instance > 0, labels.is_fold)
    adj = mesh.adjacency()
    from scipy.sparse.csgraph import connected_components
    for k in range(1, labels.n_instances + 1):
        sel = np.flatnonzero(labels.instance == k)
        n, _ = connected_components(adj[sel][:, sel], directed=False)
        assert n == 1


def test_labeling_deterministic(bumpy):
    mesh, field, labels = bumpy
    again = detect_folds(mesh, estimate_curvature(mesh))
    assert again.instance.tobytes() == labels.instance.tobytes()
    assert again.is_fold.tobytes() == labels.is_fold.tobytes()


def test_min_size_filter_renumbers():
    # a 10x10 grid patch; three blobs of 30, 7 and 25 vertices
    mesh = shapes.plane(z=0.0, half_size=10.0, n=10)
    flags = np.zeros(100, dtype=bool)
    flags[0:30] = True          # rows 0-2
    flags[50:53] = True         # 3 vertices, row 5
    flags[60:64] = True         # 4 vertices, row 6 -> joins the row 5 blob: 7 total
    flags[75:100] = True        # rows 7.5-9, 25 vertices
    out = label_components(mesh, flags, min_size=20)
    assert out.n_instances == 2
    assert set(np.unique(out.instance)) == {0, 1, 2}
    assert not out.is_fold[50:53].any()
    assert (out.instance[0:30] == 1).all() and (out.instance[75:100] == 2).all()


def test_umbilic_vertices_do_not_seed():
    mesh = shapes.icosphere(1.0, 4)
    f = estimate_curvature(mesh)
    # k1 = 1 > 0.25 everywhere, but the sphere is umbilic
    assert not detect_folds(mesh, f).is_fold.any()
    assert detect_folds(mesh, f, FoldParams(curvature_threshold=0.25)).n_instances == 0


# --- rendering --------------------------------------------------------------

def _blank(mesh):
    n = mesh.n_vertices
    return FoldLabeling(np.zeros(n, bool), np.zeros(n, np.int32))


def test_plane_depth_constant():
    mesh = shapes.plane(z=100.0)
    pose = look_at((0, 0, 0), (0, 0, 1), (0, -1, 0), intrinsics_for(64, 64, 60))
    fr = render_frame(mesh, _blank(mesh), pose, (64, 64))
    assert fr.hit.all()
    np.testing.assert_allclose(fr.depth, 100.0, rtol=0.01)


def test_tilted_plane_depth_matches_ray_intersection():
    # plane z = 100 + 0.3 x, analytic depth along the optical axis via ray/plane intersection
    s = np.linspace(-400, 400, 41)
    xx, yy = np.meshgrid(s, s)
    verts = np.stack([xx, yy, 100 + 0.3 * xx], -1).reshape(-1, 3)
    from foldsim.geo.shapes import _grid_faces
    mesh = TriMesh(verts, _grid_faces(41, 41, False, False))
    h = w = 48
    intr = intrinsics_for(w, h, 70)
    pose = look_at((0, 0, 0), (0, 0, 1), (0, -1, 0), intr)
    fr = render_frame(mesh, _blank(mesh), pose, (h, w))
    dirs = oracles.ray_directions(pose.rotation, *intr, h, w)
    t = 100.0 / (dirs[..., 2] - 0.3 * dirs[..., 0])
    assert fr.hit.all()
    np.testing.assert_allclose(fr.depth, t, rtol=0.01)


def test_looking_away_is_empty():
    mesh = shapes.plane(z=100.0)
    pose = look_at((0, 0, 0), (0, 0, -1), (0, 1, 0), intrinsics_for(32, 32, 60))
    fr = render_frame(mesh, _blank(mesh), pose, (32, 32))
    assert not fr.hit.any()
    assert (fr.depth == 0).all() and not fr.binary.any() and not fr.instance.any()
    assert (fr.rgb == 0).all()


def test_interior_view_matches_analytic_band(bumpy):
    mesh, _, labels = bumpy
    h = w = 64
    intr = intrinsics_for(w, h, 100)
    pose = look_at((0, 0, 0.5), (0, 0, 20.5), (0, 1, 0), intr)
    fr = render_frame(mesh, labels, pose, (h, w))
    gt = oracles.raymarch_tube_band(pose.position, pose.rotation, intr, h, w)
    pred = fr.binary > 0
    iou = (pred & gt).sum() / (pred | gt).sum()
    assert iou >= 0.7


def test_raster_consistency(bumpy):
    mesh, _, labels = bumpy
    traj = centerline_trajectory([(0, 0, 0.5), (1, 0, 30), (0, 1, 59)], 6, intrinsics_for(48, 48, 90))
    for pose in traj.poses:
        fr = render_frame(mesh, labels, pose, (48, 48))
        assert np.array_equal(fr.instance > 0, fr.binary == 1)
        assert np.all(np.isfinite(fr.depth)) and np.all(fr.depth[fr.hit] > 0)
        assert fr.rgb.shape == (48, 48, 3) and fr.rgb.min() >= 0 and fr.rgb.max() <= 1


def test_render_rejects_bad_resolution(bumpy):
    mesh, _, labels = bumpy
    pose = look_at((0, 0, 1), (0, 0, 2))
    with pytest.raises(ValueError):
        render_frame(mesh, labels, pose, (0, 10))


def test_camera_pose_validation():
    with pytest.raises(ValueError):
        CameraPose((0, 0, 0), (1.0, 0.1, 0, 0), 1, 1, 0, 0)
    with pytest.raises(ValueError):
        CameraPose((0, 0, 0), (1.0, 0, 0, 0), -1, 1, 0, 0)


# --- dataset ----------------------------------------------------------------

def _small_setup():
    mesh = shapes.bumpy_cylinder(n_z=121, n_theta=48)
    labels = detect_folds(mesh, estimate_curvature(mesh))
    return mesh, labels


def test_generate_dataset_counts(tmp_path):
    mesh, labels = _small_setup()
    traj = centerline_trajectory([(0, 0, 0.5), (0, 0, 50)], 10, intrinsics_for(24, 24, 90))
    manifest = generate_dataset(mesh, labels, traj, (24, 24), tmp_path / "sim")
    assert manifest.frame_count == 10
    files = [p for p in (tmp_path / "sim").rglob("*") if p.is_file() and p.name != "manifest.json"]
    assert len(files) == 40
    back = load_manifest(tmp_path / "sim" / "manifest.json")
    assert back.fps == 50.0
    rec = back.frames[3]
    assert len(rec.pose) == 7 and len(rec.intrinsics) == 4
    depth = io.read_pfm(back.path(rec.depth))
    binary = io.read_binary(back.path(rec.binary))
    inst = io.read_instance(back.path(rec.instance))
    assert depth.shape == binary.shape == inst.shape == (24, 24)
    assert np.array_equal(inst > 0, binary == 1)


def test_generate_dataset_empty_trajectory(tmp_path):
    mesh, labels = _small_setup()
    traj = Trajectory([look_at((0, 0, 1), (0, 0, 2))])
    traj.poses.clear()
    with pytest.raises(ValueError):
        generate_dataset(mesh, labels, traj, (8, 8), tmp_path)
    with pytest.raises(ValueError):
        Trajectory([])


def test_generate_dataset_unwritable(tmp_path):
    mesh, labels = _small_setup()
    blocker = tmp_path / "file"
    blocker.write_text("x")
    traj = Trajectory([look_at((0, 0, 1), (0, 0, 2))])
    with pytest.raises(OSError):
        generate_dataset(mesh, labels, traj, (8, 8), blocker / "sub")


def test_trajectory_files_roundtrip(tmp_path):
    traj = centerline_trajectory([(0, 0, 0), (0, 0, 10)], 4, (10.0, 10.0, 8.0, 8.0), fps=25)
    save_trajectory(traj, tmp_path / "t.json")
    back = load_trajectory(tmp_path / "t.json")
    assert len(back) == 4 and back.fps == 25
    np.testing.assert_allclose(back.poses[2].as_list(), traj.poses[2].as_list())
    (tmp_path / "c.json").write_text(json.dumps({"centerline": [[0, 0, 0], [0, 0, 30]], "n_frames": 7}))
    cl = load_trajectory(tmp_path / "c.json", 32, 32)
    assert len(cl) == 7 and cl.fps == 50.0
    assert cl.poses[0].cx == 16.0


def test_mesh_writers_roundtrip(tmp_path):
    mesh = shapes.cylinder(n_theta=8, n_z=4)
    save_obj(mesh, tmp_path / "c.obj")
    back = load_mesh(tmp_path / "c.obj")
    np.testing.assert_array_equal(back.faces, mesh.faces)
