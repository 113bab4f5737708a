"""Fold segmentation network: an injected encoder backbone plus a U-Net style decoder."""

from __future__ import annotations

from pathlib import Path
from typing import Callable

import torch
import torch.nn.functional as nnf
from torch import nn

N_CLASSES = 2  # background, fold


class Backbone(nn.Module):
    """Maps ``(N, 3, H, W)`` images to a feature pyramid, finest level first.

    ``channels[i]`` is the channel count of level ``i``.
    """

    channels: list[int]


def _double_conv(cin, cout):
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, 1, 1, bias=False), nn.BatchNorm2d(cout), nn.ReLU(inplace=True),
        nn.Conv2d(cout, cout, 3, 1, 1, bias=False), nn.BatchNorm2d(cout), nn.ReLU(inplace=True),
    )


class SmallConvEncoder(Backbone):
    """Plain conv encoder for desk-scale runs: full, 1/2, 1/4 and 1/8 resolution levels."""

    def __init__(self, width: int = 8, levels: int = 4):
        super().__init__()
        self.channels = [width * 2 ** i for i in range(levels)]
        cins = [3] + self.channels[:-1]
        self.stages = nn.ModuleList(_double_conv(a, b) for a, b in zip(cins, self.channels))

    def forward(self, x):
        feats = []
        for i, stage in enumerate(self.stages):
            if i:
                x = nnf.max_pool2d(x, 2)
            x = stage(x)
            feats.append(x)
        return feats


class TorchScriptBackbone(Backbone):
    """Adapter for an exported pretrained encoder that returns a list of feature maps.

    The wrapped weights are consumed as they are; with ``frozen`` they receive no
    gradient and stay in eval mode.
    """

    def __init__(self, path, frozen: bool = True):
        super().__init__()
        self.path = Path(path)
        self.net = torch.jit.load(str(self.path), map_location="cpu")
        self.frozen = frozen
        with torch.no_grad():
            probe = self.net(torch.zeros(1, 3, 64, 64))
        self.channels = [int(f.shape[1]) for f in probe]
        if frozen:
            for p in self.net.parameters():
                p.requires_grad_(False)

    def train(self, mode: bool = True):
        super().train(mode)
        if self.frozen:
            self.net.eval()
        return self

    def forward(self, x):
        return list(self.net(x))


_BACKBONES: dict[str, Callable[..., Backbone]] = {"small": SmallConvEncoder}


def register_backbone(name: str, factory: Callable[..., Backbone]) -> None:
    _BACKBONES[name] = factory


def build_backbone(spec: str, **kwargs) -> Backbone:
    """``"small"`` or any registered name; ``"torchscript:<path>"`` loads an exported encoder."""
    if spec.startswith("torchscript:"):
        return TorchScriptBackbone(spec.split(":", 1)[1], **kwargs)
    try:
        return _BACKBONES[spec](**kwargs)
    except KeyError:
        raise ValueError(f"unknown backbone {spec!r}; known: {sorted(_BACKBONES)}") from None


class SegModel(nn.Module):
    """Backbone features fused coarse to fine; returns 2-class logits at input resolution."""

    def __init__(self, backbone: Backbone):
        super().__init__()
        self.backbone = backbone
        ch = list(backbone.channels)
        self.up = nn.ModuleList(_double_conv(ch[i + 1] + ch[i], ch[i]) for i in reversed(range(len(ch) - 1)))
        self.head = nn.Conv2d(ch[0], N_CLASSES, 1)

    def forward(self, x):
        feats = self.backbone(x)
        y = feats[-1]
        for block, skip in zip(self.up, reversed(feats[:-1])):
            y = nnf.interpolate(y, size=skip.shape[-2:], mode="bilinear", align_corners=False)
            y = block(torch.cat([y, skip], dim=1))
        logits = self.head(y)
        if logits.shape[-2:] != x.shape[-2:]:
            logits = nnf.interpolate(logits, size=x.shape[-2:], mode="bilinear", align_corners=False)
        return logits
