"""Score a prediction manifest against a ground-truth manifest."""

from __future__ import annotations

import json
from pathlib import Path

from .. import io
from ..manifest import DatasetManifest
from .metrics import binary_iou, match_instances
from .overlay import render_overlay
from .report import MetricReport


def _instances(manifest: DatasetManifest, rec):
    if rec.instance:
        return io.read_instance(manifest.path(rec.instance))
    from ..segment.predict import default_min_area, extract_instances
    mask = io.read_binary(manifest.path(rec.binary))
    return extract_instances(mask, default_min_area(*mask.shape))


def evaluate(pred: DatasetManifest, gt: DatasetManifest, tau: float = 0.5, out_dir=None,
             model: str = "model", train_sets=("Sim",), translation: str = "N.A.",
             overlays: bool = True) -> MetricReport:
    """Binary IoU per frame, instance matching at ``tau``, optional overlay PNGs.

    With ``out_dir`` writes ``metrics.json``, ``matches.json`` and ``overlays/<id>.png``.
    """
    preds = pred.by_id()
    scored = [r for r in gt.frames if r.binary]
    if not scored:
        raise ValueError(f"{gt.name} has no annotated frames")
    missing = [r.id for r in scored if r.id not in preds]
    if missing:
        raise ValueError(f"no prediction for frame(s) {missing}")
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None and overlays:
        (out_dir / "overlays").mkdir(parents=True, exist_ok=True)

    per_frame, matches = [], {}
    for rec in scored:
        p = preds[rec.id]
        per_frame.append(binary_iou(io.read_binary(pred.path(p.binary)), io.read_binary(gt.path(rec.binary))))
        p_inst, g_inst = _instances(pred, p), _instances(gt, rec)
        match = match_instances(p_inst, g_inst, tau)
        matches[rec.id] = {"matches": [list(m) for m in match.matches], "unmatched_pred": match.unmatched_pred,
                           "unmatched_gt": match.unmatched_gt}
        if out_dir is not None and overlays:
            io.write_rgb(out_dir / "overlays" / f"{rec.id}.png",
                         render_overlay(io.read_rgb(gt.path(rec.rgb)), p_inst, match))

    report = MetricReport.from_per_frame(
        per_frame, frame_ids=[r.id for r in scored], model=model, train_sets=list(train_sets),
        translation=translation, eval_set=gt.name, meta={"tau": tau, "prediction_set": pred.name},
    )
    if out_dir is not None:
        report.save(out_dir / "metrics.json")
        (out_dir / "matches.json").write_text(json.dumps(matches, indent=1, sort_keys=True), encoding="utf-8")
    return report
