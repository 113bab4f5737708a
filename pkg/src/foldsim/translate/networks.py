"""Small convolutional generators and patch discriminators.

Generators add a learned per-pixel colour map of the input (a 1x1 conv,
initialised to identity) to a spatial residual and clip to [-1, 1]. Instance
normalisation inside the residual branch discards absolute intensity, so the
colour path is what lets a small network remap global brightness and tint.
Zeroing the residual's output layer gives an exact identity map.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn


@dataclass(frozen=True)
class NetConfig:
    channels: int = 3
    gen_width: int = 8
    n_res: int = 2
    disc_width: int = 8

    def to_dict(self) -> dict:
        return asdict(self)


def _conv_block(cin, cout, stride=1):
    return [nn.Conv2d(cin, cout, 3, stride, 1), nn.InstanceNorm2d(cout), nn.ReLU(inplace=True)]


class ResBlock(nn.Module):
    def __init__(self, ch: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(ch, ch, 3, 1, 1), nn.InstanceNorm2d(ch), nn.ReLU(inplace=True),
            nn.Conv2d(ch, ch, 3, 1, 1), nn.InstanceNorm2d(ch),
        )

    def forward(self, x):
        return x + self.body(x)


class Generator(nn.Module):
    """Three resolution levels down, residual blocks at the bottom, three levels back up."""

    def __init__(self, channels: int = 3, width: int = 8, n_res: int = 2, identity_init: bool = False):
        super().__init__()
        self.channels = channels
        w = width
        self.encoder = nn.Sequential(
            *_conv_block(channels, w), *_conv_block(w, 2 * w, 2), *_conv_block(2 * w, 4 * w, 2),
        )
        self.bottleneck = nn.Sequential(*[ResBlock(4 * w) for _ in range(n_res)])
        self.decoder = nn.Sequential(
            nn.Upsample(scale_factor=2, mode="nearest"), *_conv_block(4 * w, 2 * w),
            nn.Upsample(scale_factor=2, mode="nearest"), *_conv_block(2 * w, w),
        )
        self.head = nn.Conv2d(w, channels, 3, 1, 1)
        self.color = nn.Conv2d(channels, channels, 1)
        init_weights(self)
        with torch.no_grad():
            self.color.weight.copy_(torch.eye(channels).reshape(channels, channels, 1, 1))
            self.color.bias.zero_()
        if identity_init:
            nn.init.zeros_(self.head.weight)
            nn.init.zeros_(self.head.bias)

    def forward(self, x):
        if x.shape[-1] % 4 or x.shape[-2] % 4:
            raise ValueError(f"image size {tuple(x.shape[-2:])} must be divisible by 4")
        r = self.head(self.decoder(self.bottleneck(self.encoder(x))))
        return torch.clamp(self.color(x) + r, -1.0, 1.0)


class PatchDiscriminator(nn.Module):
    """Three conv layers; each output cell scores one receptive-field patch."""

    def __init__(self, channels: int = 3, width: int = 8):
        super().__init__()
        w = width
        self.net = nn.Sequential(
            nn.Conv2d(channels, w, 4, 2, 1), nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(w, 2 * w, 4, 2, 1), nn.InstanceNorm2d(2 * w), nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(2 * w, 1, 3, 1, 1),
        )
        init_weights(self)

    def forward(self, x):
        return self.net(x)


def init_weights(module: nn.Module, std: float = 0.02) -> None:
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            nn.init.normal_(m.weight, 0.0, std)
            nn.init.zeros_(m.bias)


def build_networks(cfg: NetConfig, identity_init: bool = False):
    """Return ``(G, F, D_X, D_Y)`` in creation order (the order matters for seeding)."""
    G = Generator(cfg.channels, cfg.gen_width, cfg.n_res, identity_init)
    F = Generator(cfg.channels, cfg.gen_width, cfg.n_res, identity_init)
    D_X = PatchDiscriminator(cfg.channels, cfg.disc_width)
    D_Y = PatchDiscriminator(cfg.channels, cfg.disc_width)
    return G, F, D_X, D_Y
