"""Static PNG figures from a completed pipeline run."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .. import io  # noqa: E402
from ..manifest import load_manifest  # noqa: E402
from ..translate.losses import COMPONENTS  # noqa: E402
from ..translate.train import read_loss_log  # noqa: E402
from .ledger import RunLedger  # noqa: E402


class FigureError(RuntimeError):
    pass


def _require(ledger: RunLedger, stage: str) -> dict[str, Path]:
    try:
        outputs = ledger.outputs(stage)
    except KeyError as exc:
        raise FigureError(str(exc)) from exc
    missing = [str(p) for p in outputs.values() if not p.exists()]
    if missing:
        raise FigureError(f"{stage} output(s) missing: {missing}")
    return outputs


def paired_frames(sim, aug) -> list:
    """(source, translated) records sharing a frame id, in source order."""
    aug_by_id = aug.by_id()
    return [(r, aug_by_id[r.id]) for r in sim.frames if r.id in aug_by_id]


def translation_grid(sim_manifest, aug_manifest, out, max_pairs: int = 8) -> Path:
    """Columns of (S) simulated frames over (T) their translations, matched by frame id."""
    sim, aug = load_manifest(sim_manifest), load_manifest(aug_manifest)
    pairs = paired_frames(sim, aug)[:max_pairs]
    if not pairs:
        raise FigureError(f"no frame ids shared by {sim.name} and {aug.name}")
    fig, axes = plt.subplots(2, len(pairs), figsize=(1.6 * len(pairs), 3.6), squeeze=False)
    for col, (s, t) in enumerate(pairs):
        for row, (m, rec, tag) in enumerate(((sim, s, "S"), (aug, t, "T"))):
            ax = axes[row, col]
            ax.imshow(io.read_rgb(m.path(rec.rgb)), interpolation="nearest")
            ax.set_title(f"{rec.id} ({tag})", fontsize=7)
            ax.axis("off")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return Path(out)


def loss_curves(loss_csv, out, seg_log=None) -> Path:
    """Every logged translation step, one line per loss component; segmentation loss alongside when given."""
    rows = read_loss_log(loss_csv)
    if not rows:
        raise FigureError(f"{loss_csv} has no rows")
    steps = np.array([r["step"] for r in rows])
    n_panels = 2 if seg_log else 1
    fig, axes = plt.subplots(1, n_panels, figsize=(6 * n_panels, 3.5), squeeze=False)
    ax = axes[0, 0]
    for k in COMPONENTS:
        ax.plot(steps, [r[k] for r in rows], label=k, linewidth=0.8)
    ax.set_xlim(steps.min(), steps.max())
    ax.set_xlabel("step")
    ax.set_title("translation losses")
    ax.legend(fontsize=7, ncol=2)
    if seg_log:
        data = np.genfromtxt(seg_log, delimiter=",", names=True)
        ax = axes[0, 1]
        ax.plot(np.atleast_1d(data["epoch"]), np.atleast_1d(data["loss"]), label="loss")
        ax.plot(np.atleast_1d(data["epoch"]), np.atleast_1d(data["train_iou"]), label="train IoU")
        ax.set_xlabel("epoch")
        ax.set_title("segmentation")
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return Path(out)


def overlay_grid(gt_manifest, eval_dir, out, max_rows: int = 6) -> Path:
    """Rows of original | ground-truth mask | matched prediction overlay."""
    gt = load_manifest(gt_manifest)
    eval_dir = Path(eval_dir)
    rows = [r for r in gt.frames if r.binary and (eval_dir / "overlays" / f"{r.id}.png").is_file()][:max_rows]
    if not rows:
        raise FigureError(f"no overlays under {eval_dir}")
    fig, axes = plt.subplots(len(rows), 3, figsize=(5, 1.7 * len(rows)), squeeze=False)
    for i, rec in enumerate(rows):
        panels = (io.read_rgb(gt.path(rec.rgb)), io.read_binary(gt.path(rec.binary)),
                  io.read_rgb(eval_dir / "overlays" / f"{rec.id}.png"))
        for j, (img, title) in enumerate(zip(panels, ("original", "GT", "prediction"))):
            ax = axes[i, j]
            ax.imshow(img, cmap="gray" if img.ndim == 2 else None, interpolation="nearest")
            ax.axis("off")
            if i == 0:
                ax.set_title(title, fontsize=8)
        axes[i, 0].text(-2, img.shape[0] / 2, rec.id, fontsize=6, ha="right", va="center")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return Path(out)


def emit_figures(ledger_path, out_dir=None) -> list[Path]:
    """Write translation grids, loss curves and overlay grids; record them in the ledger."""
    ledger = RunLedger.open(ledger_path)
    root = ledger.root
    out_dir = Path(out_dir) if out_dir is not None else root / "figures"
    out_dir.mkdir(parents=True, exist_ok=True)

    data = _require(ledger, "gen-data")
    aug = _require(ledger, "translate")
    trans = _require(ledger, "train-translate")
    seg = _require(ledger, "train-seg")
    ev = _require(ledger, "eval")

    written = [
        translation_grid(data["sim_test"], aug["sim_aug_test"], out_dir / "translation_test.png"),
        translation_grid(data["sim_train"], aug["sim_aug_train"], out_dir / "translation_train.png"),
        loss_curves(trans["loss_log"], out_dir / "loss_curves.png", seg.get("train_log")),
    ]
    gt_for = {"Sim": data["sim_test"], "Sim-Aug": aug["sim_aug_test"], "Real": data["real_test"]}
    for key, path in sorted(ev.items()):
        if key.startswith("eval_dir_"):
            name = key[len("eval_dir_"):]
            written.append(overlay_grid(gt_for[name], path, out_dir / f"overlays_{name}.png"))

    ledger.append("figures", "completed", outputs={p.stem: str(p.relative_to(root)) for p in written
                                                   if p.is_relative_to(root)},
                  files=[str(p.relative_to(root)) for p in written if p.is_relative_to(root)])
    return written
