"""History of generated images used to stabilise discriminator updates."""

from __future__ import annotations

import numpy as np
import torch


class ImagePool:
    """Fixed-capacity store of past generator outputs.

    Until full, every image is stored and returned as is. Afterwards each
    incoming image is, with probability one half, swapped for a random stored
    one (which it then replaces); otherwise it passes straight through.
    """

    def __init__(self, capacity: int = 50, seed: int = 0):
        if capacity < 0:
            raise ValueError("capacity must be >= 0")
        self.capacity = capacity
        self.images: list[torch.Tensor] = []
        self.rng = np.random.default_rng(seed)
        self.last_sources: list[str] = []  # "new" or "stored", one per image of the last query

    def __len__(self):
        return len(self.images)

    def query(self, images: torch.Tensor) -> torch.Tensor:
        images = images.detach()
        self.last_sources = []
        if self.capacity == 0:
            self.last_sources = ["new"] * len(images)
            return images
        out = []
        for img in images:
            if len(self.images) < self.capacity:
                self.images.append(img.clone())
                out.append(img)
                self.last_sources.append("new")
            elif self.rng.random() < 0.5:
                idx = int(self.rng.integers(self.capacity))
                out.append(self.images[idx].clone())
                self.images[idx] = img.clone()
                self.last_sources.append("stored")
            else:
                out.append(img)
                self.last_sources.append("new")
        return torch.stack(out)
