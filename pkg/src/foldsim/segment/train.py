"""Supervised fold segmentation on paired original/translated frames."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch
import torch.nn.functional as nnf

from ..checkpoint import save_checkpoint
from ..evaluation.metrics import binary_iou
from ..manifest import DatasetManifest
from .data import FrameCache, PairedBatch, Triple, batch_tensors, build_paired_batches, pair_frames
from .model import SegModel, build_backbone

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = "segmentation"


class DivergenceError(RuntimeError):
    pass


@dataclass
class SegTrainConfig:
    epochs: int = 150
    lr: float = 1e-2
    momentum: float = 0.9
    image_size: int = 256
    triples_per_batch: int = 8
    seed: int = 0
    ce_weight: float = 1.0
    dice_weight: float = 1.0
    backbone: str = "small"
    width: int = 8
    freeze_backbone: bool = False
    augment: bool = True

    def __post_init__(self):
        for name in ("epochs", "lr", "image_size", "triples_per_batch", "width"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.ce_weight < 0 or self.dice_weight < 0 or self.ce_weight + self.dice_weight == 0:
            raise ValueError("loss weights must be >= 0 and not both zero")

    def to_dict(self) -> dict:
        return asdict(self)


def build_model(config: SegTrainConfig) -> SegModel:
    kwargs = {"width": config.width} if config.backbone == "small" else {}
    if config.backbone.startswith("torchscript:"):
        kwargs = {"frozen": config.freeze_backbone}
    model = SegModel(build_backbone(config.backbone, **kwargs))
    if config.freeze_backbone:
        for p in model.backbone.parameters():
            p.requires_grad_(False)
    return model


def seg_loss(logits: torch.Tensor, target: torch.Tensor, ce_weight: float = 1.0, dice_weight: float = 1.0):
    """Cross-entropy plus soft Dice on the fold class."""
    ce = nnf.cross_entropy(logits, target)
    prob = torch.softmax(logits, dim=1)[:, 1]
    tgt = target.to(prob.dtype)
    dice = 1.0 - (2.0 * (prob * tgt).sum() + 1.0) / (prob.sum() + tgt.sum() + 1.0)
    return ce_weight * ce + dice_weight * dice


@torch.no_grad()
def mean_train_iou(model: SegModel, triples: list[Triple], cache: FrameCache, chunk: int = 32) -> float:
    """Mean per-image IoU over both variants of every training frame, without augmentation."""
    model.eval()
    ious = []
    for s in range(0, len(triples), chunk):
        part = triples[s:s + chunk]
        images, target = batch_tensors(PairedBatch(tuple(part)), cache)
        pred = model(images).argmax(dim=1).numpy()
        ious += [binary_iou(p, t) for p, t in zip(pred, target.numpy())]
    return float(np.mean(ious))


@dataclass
class SegTrainResult:
    model: SegModel
    checkpoint: Optional[Path]
    log: list[dict]
    log_path: Optional[Path] = None


def train_segmentation(sim: DatasetManifest, aug: DatasetManifest, config: SegTrainConfig,
                       out_dir=None, triples: list[Triple] | None = None) -> SegTrainResult:
    """Train for ``config.epochs`` epochs; with ``out_dir`` write the checkpoint and ``train_log.csv``."""
    cfg = config
    triples = triples if triples is not None else pair_frames(sim, aug)
    if not triples:
        raise ValueError("no training frames")
    cache = FrameCache()
    h, w = cache.rgb(triples[0].sim).shape[:2]
    if (h, w) != (cfg.image_size, cfg.image_size):
        raise ValueError(f"frames are {h}x{w} but image_size is {cfg.image_size}")

    torch.manual_seed(cfg.seed)
    model = build_model(cfg)
    params = [p for p in model.parameters() if p.requires_grad]
    opt = torch.optim.SGD(params, lr=cfg.lr, momentum=cfg.momentum)
    n_batches = math.ceil(len(triples) / cfg.triples_per_batch)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=cfg.epochs * n_batches)

    log = []
    for epoch in range(cfg.epochs):
        model.train()
        aug_rng = np.random.default_rng([cfg.seed, epoch, 1]) if cfg.augment else None
        total, count = 0.0, 0
        for batch in build_paired_batches(triples, cfg.triples_per_batch, cfg.seed, epoch):
            images, target = batch_tensors(batch, cache, aug_rng)
            loss = seg_loss(model(images), target, cfg.ce_weight, cfg.dice_weight)
            if not torch.isfinite(loss):
                raise DivergenceError(f"non-finite loss {loss.item()} at epoch {epoch + 1}, "
                                      f"frames {batch.frame_ids}")
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
            sched.step()
            total += loss.item() * len(images)
            count += len(images)
        log.append({"epoch": epoch + 1, "loss": total / count, "train_iou": mean_train_iou(model, triples, cache),
                    "lr": opt.param_groups[0]["lr"]})
        logger.info("epoch %d loss %.4f train IoU %.4f", epoch + 1, log[-1]["loss"], log[-1]["train_iou"])

    ckpt_path = log_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        ckpt_path = save_checkpoint(out_dir / "segmentation.pt", CHECKPOINT_KIND, {
            "config": cfg.to_dict(),
            "image_size": [h, w],
            "params": model.state_dict(),
            "optimizer": opt.state_dict(),
            "epoch": cfg.epochs,
            "seed": cfg.seed,
            "train_frames": [t.frame_id for t in triples],
        })
        log_path = out_dir / "train_log.csv"
        with open(log_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["epoch", "loss", "train_iou", "lr"])
            writer.writeheader()
            writer.writerows({k: repr(v) if isinstance(v, float) else v for k, v in row.items()} for row in log)
    return SegTrainResult(model, ckpt_path, log, log_path)
