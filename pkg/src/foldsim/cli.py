"""Command-line entry point: one subcommand per pipeline stage plus the orchestrator."""

from __future__ import annotations

import argparse
import glob
import logging
import sys
from pathlib import Path

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2

ENV_HELP = """\
environment:
  FOLDSIM_OUTPUT_ROOT  overrides the config's output_root for `pipeline run`
  FOLDSIM_THREADS      number of torch CPU threads used by every command
exit codes: 0 success, 1 validation error, 2 stage failure
"""


class InvalidInput(ValueError):
    pass


def _manifest_path(arg: str) -> Path:
    path = Path(arg)
    return path / "manifest.json" if path.is_dir() else path


def _load(arg: str):
    from .manifest import load_manifest

    return load_manifest(_manifest_path(arg))


def _mesh_and_labels(spec: str):
    from .geo import detect_folds, estimate_curvature, load_mesh
    from .geo.shapes import BUILTIN_SHAPES

    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        if name not in BUILTIN_SHAPES:
            raise InvalidInput(f"unknown builtin mesh {name!r}; known: {sorted(BUILTIN_SHAPES)}")
        mesh = BUILTIN_SHAPES[name]()
    else:
        mesh = load_mesh(spec)
    return mesh, detect_folds(mesh, estimate_curvature(mesh))


def cmd_make_mesh(args) -> None:
    from .geo.mesh import save_obj, save_ply
    from .geo.shapes import BUILTIN_SHAPES

    mesh = BUILTIN_SHAPES[args.shape]()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    (save_ply if out.suffix.lower() == ".ply" else save_obj)(mesh, out)
    print(f"{out}: {mesh.n_vertices} vertices, {mesh.n_faces} faces")


def cmd_gen_data(args) -> None:
    from .geo import Trajectory, generate_dataset, load_trajectory
    from .translate.toy import generate_real_dataset, random_poses

    if args.width != args.height and args.style == "real":
        raise InvalidInput("realistic-style frames must be square")
    mesh, labels = _mesh_and_labels(args.mesh)
    if args.trajectory:
        traj = load_trajectory(args.trajectory, args.width, args.height)
        traj.fps = args.fps
    elif args.n_frames:
        if args.width != args.height:
            raise InvalidInput("random poses need square frames")
        traj = Trajectory(random_poses(args.n_frames, args.width, args.seed), fps=args.fps)
    else:
        raise InvalidInput("give --trajectory or --n-frames")
    if args.style == "sim":
        m = generate_dataset(mesh, labels, traj, (args.height, args.width), args.out, args.name or "Sim", args.role)
    else:
        m = generate_real_dataset(mesh, labels, traj.poses, args.width, args.out, args.name or "Real", args.role,
                                  labelled=args.labelled, seed=args.seed)
    print(f"{m.frame_count} frames -> {Path(args.out) / 'manifest.json'}")


def cmd_train_translate(args) -> None:
    from .translate import LossWeights, NetConfig, TranslateConfig, make_oracle, train_translation
    from .translate.train import load_domain

    sim_x, sim_d = load_domain(_load(args.sim), need_depth=True)
    real_y, _ = load_domain(_load(args.real))
    config = TranslateConfig(steps=args.steps, seed=args.seed, weights=LossWeights.parse(args.weights),
                             log_every=args.log_every, net=NetConfig(gen_width=args.gen_width,
                                                                     disc_width=args.disc_width))
    res = train_translation(config, sim_x, sim_d, real_y, make_oracle(args.oracle), out_dir=args.out)
    print(f"checkpoint {res.checkpoints[-1]}\nloss log {res.log_path}")


def cmd_translate(args) -> None:
    from .translate import translate_dataset

    m = translate_dataset(args.ckpt, _load(args.inp), args.out)
    print(f"{m.frame_count} frames -> {Path(args.out) / 'manifest.json'}")


def cmd_train_seg(args) -> None:
    from .segment import SegTrainConfig, train_segmentation

    sim, aug = _load(args.sim), _load(args.sim_aug)
    size = int(sim.params.get("height", 0)) or None
    config = SegTrainConfig(epochs=args.epochs, lr=args.lr, seed=args.seed, backbone=args.backbone,
                            image_size=args.image_size or size or 256, triples_per_batch=args.triples_per_batch,
                            width=args.width, freeze_backbone=args.freeze_backbone)
    res = train_segmentation(sim, aug, config, out_dir=args.out)
    print(f"checkpoint {res.checkpoint}\nfinal train IoU {res.log[-1]['train_iou']:.4f}")


def cmd_predict(args) -> None:
    from .manifest import DatasetManifest, FrameRecord
    from .segment import predict_dataset

    src = Path(args.inp)
    if src.suffix.lower() in (".png", ".jpg", ".jpeg"):
        if not src.is_file():
            raise InvalidInput(f"image not found: {src}")
        manifest = DatasetManifest(name=src.stem, role="test", frame_count=1,
                                   frames=[FrameRecord(id=src.stem, rgb=src.name)], base_dir=src.parent)
    else:
        manifest = _load(args.inp)
    m = predict_dataset(args.ckpt, manifest, args.out, min_area=args.min_area)
    print(f"{m.frame_count} predictions -> {Path(args.out) / 'manifest.json'}")


def cmd_eval(args) -> None:
    from .evaluation.evaluate import evaluate

    report = evaluate(_load(args.pred), _load(args.gt), args.tau, out_dir=args.out, model=args.model,
                      train_sets=args.train_sets.split("&"), translation=args.translation)
    print(f"{report.eval_set}: IoU {report.cell()}")


def cmd_report(args) -> None:
    from .evaluation.report import load_reports, recorded_results, write_report

    paths = sorted(glob.glob(args.runs, recursive=True))
    if not paths and not args.include_recorded:
        raise InvalidInput(f"no metric files match {args.runs!r}")
    reports = recorded_results() if args.include_recorded else []
    for p in paths:
        reports += load_reports(p)
    written = write_report(reports, args.out)
    print(Path(written["txt"]).read_text(encoding="utf-8"))


def cmd_pipeline_run(args) -> None:
    from .pipeline import load_config, run_pipeline

    ledger = run_pipeline(load_config(args.config), resume=args.resume)
    for e in ledger.entries[-6:]:
        wall = f" {e['wall_time_s']:.1f}s" if "wall_time_s" in e else ""
        print(f"{e['stage']:<16}{e['status']}{wall}")
    print(f"ledger {ledger.path}")


def cmd_pipeline_figures(args) -> None:
    from .pipeline import emit_figures

    if not Path(args.ledger).is_file():
        raise InvalidInput(f"ledger not found: {args.ledger}")
    for p in emit_figures(args.ledger, args.out):
        print(p)


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(prog="foldsim", description=__doc__, epilog=ENV_HELP, formatter_class=fmt)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, epilog=ENV_HELP, formatter_class=fmt)
        p.set_defaults(func=func)
        return p

    from .geo.shapes import BUILTIN_SHAPES

    p = add("make-mesh", cmd_make_mesh, "write a built-in test mesh as OBJ or PLY")
    p.add_argument("--shape", choices=sorted(BUILTIN_SHAPES), default="bumpy_cylinder")
    p.add_argument("--out", required=True)

    p = add("gen-data", cmd_gen_data, "render labelled frames from a mesh")
    p.add_argument("--mesh", required=True, help="OBJ/PLY path or builtin:<name>")
    p.add_argument("--trajectory", help="trajectory JSON (poses or centerline)")
    p.add_argument("--n-frames", type=int, help="random in-tube poses instead of a trajectory")
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--fps", type=float, default=50.0)
    p.add_argument("--style", choices=("sim", "real"), default="sim",
                   help="'real' writes the toy realistic domain")
    p.add_argument("--labelled", action="store_true", help="keep labels for --style real")
    p.add_argument("--name")
    p.add_argument("--role", choices=("train", "test"), default="train")
    p.add_argument("--seed", type=int, default=0)

    p = add("train-translate", cmd_train_translate, "train the depth-consistent CycleGAN")
    p.add_argument("--sim", required=True)
    p.add_argument("--real", required=True)
    p.add_argument("--oracle", default="stub", help="'stub' or a TorchScript depth model path")
    p.add_argument("--weights", default="1,10,5,1", help="adv,cyc,id,depth")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gen-width", type=int, default=8)
    p.add_argument("--disc-width", type=int, default=8)
    p.add_argument("--log-every", type=int, default=1)
    p.add_argument("--out", required=True)

    p = add("translate", cmd_translate, "translate a simulated dataset with a trained generator")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)

    p = add("train-seg", cmd_train_seg, "train fold segmentation on paired batches")
    p.add_argument("--sim", required=True)
    p.add_argument("--sim-aug", required=True)
    p.add_argument("--backbone", default="small", help="'small' or torchscript:<path>")
    p.add_argument("--freeze-backbone", action="store_true")
    p.add_argument("--epochs", type=int, default=150)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--image-size", type=int, help="defaults to the manifest's height")
    p.add_argument("--triples-per-batch", type=int, default=8)
    p.add_argument("--width", type=int, default=8)
    p.add_argument("--out", required=True)

    p = add("predict", cmd_predict, "predict binary and instance fold masks")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="inp", required=True, help="manifest, dataset directory or single image")
    p.add_argument("--min-area", type=int)
    p.add_argument("--out", required=True)

    p = add("eval", cmd_eval, "IoU and instance matching of predictions against labels")
    p.add_argument("--pred", required=True, help="prediction directory or manifest")
    p.add_argument("--gt", required=True)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--model", default="model")
    p.add_argument("--train-sets", default="Sim", help="'&'-separated training set names")
    p.add_argument("--translation", default="N.A.")
    p.add_argument("--out", required=True)

    p = add("report", cmd_report, "aggregate metric files into a comparison table")
    p.add_argument("--runs", required=True, help="glob of metrics.json files")
    p.add_argument("--include-recorded", action="store_true", help="prepend the shipped published rows")
    p.add_argument("--out", required=True)

    p = add("pipeline", None, "run the full experiment or draw its figures")
    psub = p.add_subparsers(dest="pipeline_command", required=True)
    q = psub.add_parser("run", help="run every enabled stage", epilog=ENV_HELP, formatter_class=fmt)
    q.add_argument("--config", required=True)
    q.add_argument("--resume", action="store_true", help="skip completed stages whose hash still matches")
    q.set_defaults(func=cmd_pipeline_run)
    q = psub.add_parser("figures", help="emit PNG figures from a run ledger", epilog=ENV_HELP, formatter_class=fmt)
    q.add_argument("--ledger", required=True)
    q.add_argument("--out", help="defaults to <run>/figures")
    q.set_defaults(func=cmd_pipeline_figures)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    from .pipeline import StageError
    from .pipeline.run import apply_thread_override

    apply_thread_override()
    try:
        args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # any other failure inside a stage
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
