from .camera import CameraPose, Trajectory, centerline_trajectory, intrinsics_for, load_trajectory, look_at
from .curvature import CurvatureField, estimate_curvature
from .dataset import generate_dataset
from .folds import FoldLabeling, FoldParams, detect_folds
from .mesh import MeshFormatError, TriMesh, load_mesh
from .render import NO_HIT, LabelFrame, render_frame

__all__ = [
    "CameraPose", "Trajectory", "centerline_trajectory", "intrinsics_for", "load_trajectory", "look_at",
    "CurvatureField", "estimate_curvature", "generate_dataset", "FoldLabeling", "FoldParams",
    "detect_folds", "MeshFormatError", "TriMesh", "load_mesh", "NO_HIT", "LabelFrame", "render_frame",
]
