import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from foldsim.geo import detect_folds, estimate_curvature, shapes  # noqa: E402


@pytest.fixture(scope="session")
def bumpy():
    mesh = shapes.bumpy_cylinder()
    field = estimate_curvature(mesh)
    return mesh, field, detect_folds(mesh, field)


CUBE_OBJ = """\
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
"""


@pytest.fixture
def cube_obj(tmp_path):
    path = tmp_path / "cube.obj"
    path.write_text(CUBE_OBJ)
    return path


@pytest.fixture(scope="session")
def small_scene():
    mesh = shapes.bumpy_cylinder(n_z=121, n_theta=48)
    return mesh, detect_folds(mesh, estimate_curvature(mesh))


@pytest.fixture(scope="session")
def small_sim(small_scene, tmp_path_factory):
    """Six rendered 16x16 frames on disk."""
    from foldsim.geo import centerline_trajectory, generate_dataset, intrinsics_for
    mesh, labels = small_scene
    traj = centerline_trajectory([(0, 0, 0.5), (0, 0, 40)], 6, intrinsics_for(16, 16, 100))
    return generate_dataset(mesh, labels, traj, (16, 16), tmp_path_factory.mktemp("sim"))
