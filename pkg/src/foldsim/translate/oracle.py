"""Frozen monocular depth models used by the depth-consistency term.

An oracle maps a batch of images ``(N, C, H, W)`` in [-1, 1] to positive depth
``(N, H, W)``. It is never trained: parameters are frozen and kept out of every
optimizer.
"""

from __future__ import annotations

from pathlib import Path

import torch
from torch import nn


class DepthOracle(nn.Module):
    identifier = "oracle"

    def freeze(self) -> "DepthOracle":
        self.eval()
        for p in self.parameters():
            p.requires_grad_(False)
        return self


class LuminanceDepthOracle(DepthOracle):
    """Analytic inverse of the renderer's headlight shading.

    Frames are shaded as ``color * (d_min / d)^2``, so ``1 / sqrt(luminance)``
    is proportional to depth within a frame. The result is relative depth.
    """

    identifier = "stub:luminance"

    def __init__(self, floor: float = 1e-3):
        super().__init__()
        self.floor = floor

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        lum = (images.mean(dim=1) + 1.0) * 0.5
        return torch.rsqrt(lum.clamp_min(self.floor))


class TorchScriptOracle(DepthOracle):
    """Wraps an exported TorchScript depth network (e.g. a pretrained endoscopy model)."""

    def __init__(self, path):
        super().__init__()
        self.path = Path(path)
        self.net = torch.jit.load(str(self.path), map_location="cpu")
        self.identifier = f"torchscript:{self.path.name}"

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        out = self.net(images)
        if out.dim() == 4:
            out = out[:, 0]
        return out


def make_oracle(spec: str) -> DepthOracle:
    """``"stub"`` for the analytic stub, otherwise a path to a TorchScript file."""
    if spec in ("stub", LuminanceDepthOracle.identifier):
        return LuminanceDepthOracle().freeze()
    path = Path(spec.removeprefix("torchscript:"))
    if not path.is_file():
        raise ValueError(f"unknown depth oracle {spec!r}: not 'stub' and no such file")
    return TorchScriptOracle(path).freeze()
