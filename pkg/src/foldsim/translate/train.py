"""Unpaired translation training with an optional depth-consistency term."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Literal, Optional

import numpy as np
import torch

from .. import io
from ..checkpoint import load_checkpoint, save_checkpoint
from ..manifest import DatasetManifest
from .buffer import ImagePool
from .losses import (
    COMPONENTS, ClampCounter, LossWeights, baseline_generator_losses, depth_log_loss_torch,
    discriminator_losses, generator_losses,
)
from .networks import NetConfig, build_networks

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = "translation"


class DivergenceError(RuntimeError):
    pass


@dataclass
class TranslateConfig:
    steps: int = 200
    batch_size: int = 1
    lr: float = 2e-4
    betas: tuple[float, float] = (0.5, 0.999)
    weights: LossWeights = field(default_factory=LossWeights)
    pool_capacity: int = 50
    seed: int = 0
    net: NetConfig = field(default_factory=NetConfig)
    log_every: int = 1
    checkpoint_every: int = 0  # 0: only the final checkpoint
    objective: Literal["structure", "baseline"] = "structure"

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1:
            raise ValueError("steps and batch_size must be >= 1")
        if self.objective not in ("structure", "baseline"):
            raise ValueError(f"unknown objective {self.objective!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TranslateConfig":
        d = dict(d)
        d["weights"] = LossWeights(**d.get("weights", {}))
        d["net"] = NetConfig(**d.get("net", {}))
        d["betas"] = tuple(d.get("betas", (0.5, 0.999)))
        return cls(**d)


class TranslationModel:
    """Both generators, both discriminators, their optimizers and the two history buffers."""

    def __init__(self, net: NetConfig = NetConfig(), weights: LossWeights = LossWeights(), lr: float = 2e-4,
                 betas=(0.5, 0.999), pool_capacity: int = 50, seed: int = 0, identity_init: bool = False):
        torch.manual_seed(seed)
        self.net_config = net
        self.weights = weights
        self.seed = seed
        self.G, self.F, self.D_X, self.D_Y = build_networks(net, identity_init)
        self.opt_G = torch.optim.Adam(list(self.G.parameters()) + list(self.F.parameters()), lr=lr, betas=betas)
        self.opt_D = torch.optim.Adam(list(self.D_X.parameters()) + list(self.D_Y.parameters()), lr=lr,
                                      betas=betas)
        self.pool_X = ImagePool(pool_capacity, seed=seed + 1)
        self.pool_Y = ImagePool(pool_capacity, seed=seed + 2)
        self.clamp_counter = ClampCounter()
        self.step = 0

    def networks(self) -> dict:
        return {"G": self.G, "F": self.F, "D_X": self.D_X, "D_Y": self.D_Y}

    def parameter_vector(self) -> torch.Tensor:
        return torch.cat([p.detach().reshape(-1) for m in self.networks().values() for p in m.parameters()])


@dataclass
class TrainResult:
    model: TranslationModel
    checkpoints: list[Path]
    log: list[dict]
    log_path: Optional[Path] = None


def load_domain(manifest: DatasetManifest, need_depth: bool = False):
    """Stack a manifest's frames into ``(images in [-1, 1], depth or None)`` tensors."""
    if not manifest.frames:
        raise ValueError(f"dataset {manifest.name!r} is empty")
    imgs, depths = [], []
    for rec in manifest.frames:
        imgs.append(io.read_rgb(manifest.path(rec.rgb)))
        if need_depth:
            if not rec.depth:
                raise ValueError(f"frame {rec.id} has no depth map")
            depths.append(io.read_pfm(manifest.path(rec.depth)))
    x = torch.from_numpy(np.stack(imgs).astype(np.float32)).permute(0, 3, 1, 2) * 2.0 - 1.0
    d = torch.from_numpy(np.stack(depths).astype(np.float32)) if need_depth else None
    return x.contiguous(), d


class _Sampler:
    """Seeded epoch-wise permutations over one domain."""

    def __init__(self, n: int, batch: int, rng: np.random.Generator):
        self.n, self.batch, self.rng = n, batch, rng
        self.order = np.empty(0, dtype=np.int64)

    def next(self) -> np.ndarray:
        while self.order.size < self.batch:
            self.order = np.concatenate([self.order, self.rng.permutation(self.n)])
        idx, self.order = self.order[: self.batch], self.order[self.batch:]
        return idx


def _check_finite(step: int, values: dict) -> None:
    bad = {k: v for k, v in values.items() if not math.isfinite(v)}
    if bad:
        raise DivergenceError(f"non-finite loss at step {step}: {bad}; all components: {values}")


def train_translation(config: TranslateConfig, sim_images: torch.Tensor, sim_depth: torch.Tensor,
                      real_images: torch.Tensor, oracle, out_dir=None,
                      on_step: Callable[[int, TranslationModel], None] | None = None) -> TrainResult:
    """Alternate generator and discriminator updates for ``config.steps`` steps.

    ``sim_images`` and ``real_images`` are ``(N, C, H, W)`` in [-1, 1];
    ``sim_depth`` is ``(N, H, W)`` with 0 marking pixels without geometry.
    With ``out_dir`` set, checkpoints and ``losses.csv`` are written there.
    """
    if len(sim_images) == 0 or len(real_images) == 0:
        raise ValueError("both domains need at least one image")
    if sim_images.shape[1:] != real_images.shape[1:]:
        raise ValueError(f"domain shapes differ: {tuple(sim_images.shape[1:])} vs {tuple(real_images.shape[1:])}")
    if sim_depth.shape != (sim_images.shape[0],) + tuple(sim_images.shape[2:]):
        raise ValueError("sim_depth must be (N, H, W) aligned with sim_images")
    if hasattr(oracle, "freeze"):
        oracle.freeze()

    cfg = config
    model = TranslationModel(cfg.net, cfg.weights, cfg.lr, cfg.betas, cfg.pool_capacity, cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    sample_x = _Sampler(len(sim_images), cfg.batch_size, rng)
    sample_y = _Sampler(len(real_images), cfg.batch_size, rng)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    log: list[dict] = []
    checkpoints: list[Path] = []
    height, width = sim_images.shape[2:]

    for step in range(1, cfg.steps + 1):
        ix, iy = sample_x.next(), sample_y.next()
        x, y, d_star = sim_images[ix], real_images[iy], sim_depth[ix]

        model.opt_G.zero_grad(set_to_none=True)
        if cfg.objective == "baseline":
            gen = baseline_generator_losses(x, y, model.G, model.F, model.D_X, model.D_Y, cfg.weights)
            with torch.no_grad():
                gen["depth"] = depth_log_loss_torch(
                    model.clamp_counter(oracle(gen["fake_y"])), d_star, d_star > 0)
        else:
            gen = generator_losses(x, y, model.G, model.F, model.D_X, model.D_Y, cfg.weights, d_star, oracle,
                                   model.clamp_counter)
        gen["total"].backward()
        model.opt_G.step()

        model.opt_D.zero_grad(set_to_none=True)
        fake_y = model.pool_Y.query(gen["fake_y"])
        fake_x = model.pool_X.query(gen["fake_x"])
        disc = discriminator_losses(model.D_X, model.D_Y, x, y, fake_x, fake_y)
        (disc["disc_X"] + disc["disc_Y"]).backward()
        model.opt_D.step()
        model.step = step

        row = {k: float(gen[k].detach()) for k in ("adv_G", "adv_F", "cyc", "id", "depth")}
        row.update({k: float(v.detach()) for k, v in disc.items()})
        _check_finite(step, row)
        if step % cfg.log_every == 0 or step == cfg.steps:
            log.append({"step": step, **{k: row[k] for k in COMPONENTS}})
        if on_step is not None:
            on_step(step, model)
        last = step == cfg.steps
        if out_dir is not None and (last or (cfg.checkpoint_every and step % cfg.checkpoint_every == 0)):
            path = out_dir / f"translate_step{step:07d}.pt"
            save_translation_checkpoint(path, model, cfg, (height, width), getattr(oracle, "identifier", "oracle"))
            checkpoints.append(path)

    if model.clamp_counter.count:
        logger.warning("oracle depth clamped to epsilon at %d pixel(s)", model.clamp_counter.count)
    log_path = None
    if out_dir is not None:
        log_path = write_loss_log(out_dir / "losses.csv", log)
    return TrainResult(model, checkpoints, log, log_path)


def write_loss_log(path, rows: list[dict]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["step", *COMPONENTS])
        writer.writeheader()
        for r in rows:
            writer.writerow({"step": r["step"], **{k: repr(float(r[k])) for k in COMPONENTS}})
    return path


def read_loss_log(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{"step": int(r["step"]), **{k: float(r[k]) for k in COMPONENTS}} for r in csv.DictReader(fh)]


def save_translation_checkpoint(path, model: TranslationModel, config: TranslateConfig,
                                image_size: tuple[int, int], oracle_id: str) -> Path:
    return save_checkpoint(path, CHECKPOINT_KIND, {
        "arch": model.net_config.to_dict(),
        "image_size": list(image_size),
        "params": {k: m.state_dict() for k, m in model.networks().items()},
        "optimizer": {"G": model.opt_G.state_dict(), "D": model.opt_D.state_dict()},
        "step": model.step,
        "seed": model.seed,
        "config": config.to_dict(),
        "oracle": oracle_id,
    })


def load_generator(path):
    """Rebuild the X -> Y generator from a checkpoint; returns ``(G, checkpoint dict)``."""
    ckpt = load_checkpoint(path, CHECKPOINT_KIND)
    net = NetConfig(**ckpt["arch"])
    G, _, _, _ = build_networks(net)
    G.load_state_dict(ckpt["params"]["G"])
    G.eval()
    return G, ckpt
