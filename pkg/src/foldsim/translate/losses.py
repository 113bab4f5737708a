"""Objectives for structure-aware unpaired translation.

The generator objective is the usual least-squares CycleGAN objective plus a
depth-consistency term: a frozen monocular depth model looks at the translated
simulated frame, and its prediction is compared with the simulator's depth
through the scale-invariant log loss

    L = (1/n) sum_i g_i^2 - (1/(2 n^2)) (sum_i g_i)^2,   g_i = log d_i - log d*_i

over the n valid pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as nnf

DEPTH_EPS = 1e-6

COMPONENTS = ("adv_G", "adv_F", "cyc", "id", "depth", "disc_X", "disc_Y")


@dataclass(frozen=True)
class LossWeights:
    adv: float = 1.0
    cyc: float = 10.0
    id: float = 5.0
    depth: float = 1.0

    def __post_init__(self):
        for name in ("adv", "cyc", "id", "depth"):
            if getattr(self, name) < 0:
                raise ValueError(f"loss weight {name} must be >= 0")

    @classmethod
    def parse(cls, text: str) -> "LossWeights":
        """From ``"adv,cyc,id,depth"``."""
        vals = [float(v) for v in text.split(",")]
        if len(vals) != 4:
            raise ValueError("expected four comma-separated weights: adv,cyc,id,depth")
        return cls(*vals)


def _check_depth_inputs(d, d_star, valid_mask):
    d = np.asarray(d, dtype=np.float64)
    d_star = np.asarray(d_star, dtype=np.float64)
    if d.shape != d_star.shape:
        raise ValueError(f"shape mismatch {d.shape} vs {d_star.shape}")
    mask = np.ones(d.shape, dtype=bool) if valid_mask is None else np.asarray(valid_mask, dtype=bool)
    if mask.shape != d.shape:
        raise ValueError("mask shape mismatch")
    if not mask.any():
        raise ValueError("empty valid mask")
    if np.any(d[mask] <= 0) or np.any(d_star[mask] <= 0):
        raise ValueError("depth must be strictly positive inside the mask")
    return d, d_star, mask


def depth_log_loss(d, d_star, valid_mask=None) -> float:
    """Scale-invariant log depth loss between prediction ``d`` and reference ``d_star``."""
    d, d_star, mask = _check_depth_inputs(d, d_star, valid_mask)
    g = np.log(d[mask]) - np.log(d_star[mask])
    n = g.size
    return float(np.sum(g * g) / n - np.sum(g) ** 2 / (2.0 * n * n))


def depth_log_loss_grad(d, d_star, valid_mask=None) -> np.ndarray:
    """Analytic gradient of :func:`depth_log_loss` with respect to ``d`` (zero off-mask)."""
    d, d_star, mask = _check_depth_inputs(d, d_star, valid_mask)
    g = np.zeros_like(d)
    g[mask] = np.log(d[mask]) - np.log(d_star[mask])
    n = int(mask.sum())
    grad = np.zeros_like(d)
    grad[mask] = (2.0 * g[mask] / n - g[mask].sum() / (n * n)) / d[mask]
    return grad


def depth_log_loss_torch(d: torch.Tensor, d_star: torch.Tensor, valid_mask: torch.Tensor | None = None,
                         eps: float = DEPTH_EPS) -> torch.Tensor:
    """Batched torch version: Eq. evaluated per image over its valid pixels, then averaged.

    ``d`` is clamped to ``eps`` before the log; ``d_star`` is only read on the mask.
    """
    if d.shape != d_star.shape:
        raise ValueError(f"shape mismatch {tuple(d.shape)} vs {tuple(d_star.shape)}")
    if valid_mask is None:
        valid_mask = torch.ones_like(d_star, dtype=torch.bool)
    mask = valid_mask.to(d.dtype).reshape(d.shape[0], -1)
    n = mask.sum(dim=1)
    if torch.any(n < 1):
        raise ValueError("an image has an empty valid mask")
    safe_star = torch.where(valid_mask, d_star, torch.ones_like(d_star))
    g = (torch.log(d.clamp_min(eps)) - torch.log(safe_star)).reshape(d.shape[0], -1) * mask
    per_image = (g * g).sum(dim=1) / n - g.sum(dim=1) ** 2 / (2.0 * n * n)
    return per_image.mean()


def lsgan(pred: torch.Tensor, target: float) -> torch.Tensor:
    return torch.mean((pred - target) ** 2)


def baseline_generator_losses(x, y, G, F, D_X, D_Y, weights: LossWeights) -> dict:
    """Stock CycleGAN generator objective (least-squares adversarial, L1 cycle and identity)."""
    fake_y = G(x)
    fake_x = F(y)
    adv_g = lsgan(D_Y(fake_y), 1.0)
    adv_f = lsgan(D_X(fake_x), 1.0)
    cyc = torch.mean(torch.abs(F(fake_y) - x)) + torch.mean(torch.abs(G(fake_x) - y))
    idt = torch.mean(torch.abs(G(y) - y)) + torch.mean(torch.abs(F(x) - x))
    total = weights.adv * (adv_g + adv_f) + weights.cyc * cyc + weights.id * idt
    return {"adv_G": adv_g, "adv_F": adv_f, "cyc": cyc, "id": idt, "total": total,
            "fake_x": fake_x, "fake_y": fake_y}


class ClampCounter:
    """Counts oracle outputs that had to be clamped to a positive floor."""

    def __init__(self):
        self.count = 0

    def __call__(self, depth: torch.Tensor, eps: float = DEPTH_EPS) -> torch.Tensor:
        bad = int((depth <= eps).sum())
        if bad:
            self.count += bad
        return depth.clamp_min(eps)


def generator_losses(x, y, G, F, D_X, D_Y, weights: LossWeights, gt_depth, oracle,
                     clamp: ClampCounter | None = None) -> dict:
    """Baseline objective plus the depth-consistency term on the X -> Y branch.

    With ``weights.depth == 0`` the depth term is still reported but left out of
    the graph, so the total is exactly the baseline objective.
    """
    out = baseline_generator_losses(x, y, G, F, D_X, D_Y, weights)
    clamp = clamp or ClampCounter()
    valid = gt_depth > 0
    if weights.depth > 0:
        pred = clamp(oracle(out["fake_y"]))
        depth = depth_log_loss_torch(pred, gt_depth, valid)
        out["total"] = out["total"] + weights.depth * depth
    else:
        with torch.no_grad():
            depth = depth_log_loss_torch(clamp(oracle(out["fake_y"])), gt_depth, valid)
    out["depth"] = depth
    return out


def discriminator_losses(D_X, D_Y, x, y, fake_x, fake_y) -> dict:
    """Least-squares discriminator losses; ``fake_*`` should come from the history buffers."""
    disc_y = 0.5 * (lsgan(D_Y(y), 1.0) + lsgan(D_Y(fake_y.detach()), 0.0))
    disc_x = 0.5 * (lsgan(D_X(x), 1.0) + lsgan(D_X(fake_x.detach()), 0.0))
    return {"disc_X": disc_x, "disc_Y": disc_y}


def cyclegan_losses(x, y, model, gt_depth, oracle) -> dict:
    """All seven loss components for one batch, drawing discriminator fakes from the model's buffers.

    ``model`` is a :class:`~foldsim.translate.model.TranslationModel`. Returns a
    dict of scalar tensors keyed by :data:`COMPONENTS` plus ``total``.
    """
    gen = generator_losses(x, y, model.G, model.F, model.D_X, model.D_Y, model.weights, gt_depth, oracle,
                           model.clamp_counter)
    fake_y = model.pool_Y.query(gen["fake_y"].detach())
    fake_x = model.pool_X.query(gen["fake_x"].detach())
    disc = discriminator_losses(model.D_X, model.D_Y, x, y, fake_x, fake_y)
    out = {k: gen[k] for k in ("adv_G", "adv_F", "cyc", "id", "depth", "total")}
    out.update(disc)
    return out


def structure_mask(depth: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Pixels nearer than the median valid depth: a scale-free summary of scene layout."""
    depth = np.asarray(depth, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    out = np.zeros(depth.shape, dtype=bool)
    if valid.any():
        out[valid] = depth[valid] <= np.median(depth[valid])
    return out


def mse(a, b):
    return nnf.mse_loss(a, b)
