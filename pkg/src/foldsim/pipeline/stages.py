"""Stage bodies.

Each takes the config, the output root and the outputs of the stages it depends on,
and returns its own outputs as paths relative to the root. An optional ``extra`` entry
holds scalar facts worth keeping in the ledger.
"""

from __future__ import annotations

import glob
from pathlib import Path

from ..geo import detect_folds, estimate_curvature, generate_dataset, load_mesh
from ..geo.camera import Trajectory
from ..geo.shapes import BUILTIN_SHAPES
from ..manifest import load_manifest
from ..segment import SegTrainConfig, predict_dataset, train_segmentation
from ..translate import LossWeights, NetConfig, TranslateConfig, make_oracle, train_translation, translate_dataset
from ..translate.toy import generate_real_dataset, random_poses
from ..translate.train import load_domain
from .config import ExperimentConfig

# per-stage seed offsets so one top-level seed fixes every stage
TEST_POSE_OFFSET = 1
REAL_POSE_OFFSET = 2
REAL_TEST_POSE_OFFSET = 3


def _rel(path: Path, root: Path) -> str:
    return str(Path(path).resolve().relative_to(root.resolve()))


def _mesh(cfg: ExperimentConfig):
    spec = cfg.gen_data.mesh
    if spec.startswith("builtin:"):
        return BUILTIN_SHAPES[spec.split(":", 1)[1]]()
    return load_mesh(cfg.mesh_path())


def gen_data(cfg: ExperimentConfig, root: Path, upstream: dict) -> dict:
    g = cfg.gen_data
    mesh = _mesh(cfg)
    labels = detect_folds(mesh, estimate_curvature(mesh))
    size = g.resolution
    res = (size, size)

    def poses(n, offset):
        return Trajectory(random_poses(n, size, cfg.seed * 10 + offset, fov_deg=g.fov_deg), fps=g.fps)

    data = root / "data"
    sim_train = generate_dataset(mesh, labels, poses(g.train_frames, 0), res, data / "sim_train", "Sim", "train")
    sim_test = generate_dataset(mesh, labels, poses(g.test_frames, TEST_POSE_OFFSET), res, data / "sim_test",
                                "Sim", "test")
    real_train = generate_real_dataset(mesh, labels, poses(g.real_frames, REAL_POSE_OFFSET).poses, size,
                                       data / "real_train", "Real", "train", labelled=False, seed=cfg.seed)
    real_test = generate_real_dataset(mesh, labels, poses(g.test_frames, REAL_TEST_POSE_OFFSET).poses, size,
                                      data / "real_test", "Real", "test", labelled=True, seed=cfg.seed + 1)
    return {k: _rel(m.base_dir / "manifest.json", root) for k, m in
            {"sim_train": sim_train, "sim_test": sim_test, "real_train": real_train, "real_test": real_test}.items()}


def train_translate(cfg: ExperimentConfig, root: Path, upstream: dict) -> dict:
    t = cfg.train_translate
    data = upstream["gen-data"]
    sim_x, sim_d = load_domain(load_manifest(data["sim_train"]), need_depth=True)
    real_y, _ = load_domain(load_manifest(data["real_train"]))
    tc = TranslateConfig(steps=t.steps, lr=t.lr, weights=LossWeights.parse(t.weights), seed=cfg.seed,
                         pool_capacity=t.pool_capacity, log_every=t.log_every,
                         net=NetConfig(gen_width=t.gen_width, disc_width=t.disc_width))
    out = root / "translate"
    res = train_translation(tc, sim_x, sim_d, real_y, make_oracle(t.oracle), out_dir=out)
    return {"checkpoint": _rel(res.checkpoints[-1], root), "loss_log": _rel(res.log_path, root),
            "out_dir": _rel(out, root)}


def translate(cfg: ExperimentConfig, root: Path, upstream: dict) -> dict:
    ckpt = upstream["train-translate"]["checkpoint"]
    data = upstream["gen-data"]
    out = {}
    for split in ("train", "test"):
        m = translate_dataset(ckpt, load_manifest(data[f"sim_{split}"]), root / "data" / f"sim_aug_{split}")
        out[f"sim_aug_{split}"] = _rel(m.base_dir / "manifest.json", root)
    return out


def train_seg(cfg: ExperimentConfig, root: Path, upstream: dict) -> dict:
    s = cfg.train_seg
    sim = load_manifest(upstream["gen-data"]["sim_train"])
    aug = load_manifest(upstream["translate"]["sim_aug_train"])
    sc = SegTrainConfig(epochs=s.epochs, lr=s.lr, image_size=cfg.gen_data.resolution,
                        triples_per_batch=s.triples_per_batch, seed=cfg.seed, backbone=s.backbone, width=s.width,
                        augment=s.augment)
    out = root / "segment"
    res = train_segmentation(sim, aug, sc, out_dir=out)
    return {"checkpoint": _rel(res.checkpoint, root), "train_log": _rel(res.log_path, root),
            "extra": {"final_train_iou": res.log[-1]["train_iou"]}}


def evaluate_stage(cfg: ExperimentConfig, root: Path, upstream: dict) -> dict:
    from ..evaluation.evaluate import evaluate

    sets = {"Sim": upstream["gen-data"]["sim_test"], "Real": upstream["gen-data"]["real_test"]}
    if "translate" in upstream:
        sets["Sim-Aug"] = upstream["translate"]["sim_aug_test"]
    ckpt = upstream["train-seg"]["checkpoint"]
    out = {}
    for name in cfg.eval.sets:
        gt = load_manifest(sets[name])
        pred = predict_dataset(ckpt, gt, root / "predictions" / name)
        evaluate(pred, gt, cfg.eval.tau, out_dir=root / "eval" / name, model="EndoFM-TU-toy",
                 train_sets=["Sim-Aug", "Sim"], translation="Ours")
        out[f"metrics_{name}"] = _rel(root / "eval" / name / "metrics.json", root)
        out[f"eval_dir_{name}"] = _rel(root / "eval" / name, root)
        out[f"predictions_{name}"] = _rel(pred.base_dir, root)
    return out


def report(cfg: ExperimentConfig, root: Path, upstream: dict) -> dict:
    from ..evaluation.report import load_reports, recorded_results, write_report

    reports = []
    for path in sorted(glob.glob(str(root / "eval" / "*" / "metrics.json"))):
        reports += load_reports(path)
    if cfg.report.include_recorded:
        reports = recorded_results() + reports
    paths = write_report(reports, root / "report" / "table")
    return {k: _rel(v, root) for k, v in paths.items()}


STAGE_FUNCS = {
    "gen-data": gen_data,
    "train-translate": train_translate,
    "translate": translate,
    "train-seg": train_seg,
    "eval": evaluate_stage,
    "report": report,
}

DEPENDS = {
    "gen-data": [],
    "train-translate": ["gen-data"],
    "translate": ["gen-data", "train-translate"],
    "train-seg": ["gen-data", "translate"],
    "eval": ["gen-data", "translate", "train-seg"],
    "report": ["eval"],
}
