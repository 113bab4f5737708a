"""Paired batches: each frame contributes its original and its translated image with one mask."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import torch
from scipy.ndimage import rotate

from .. import io
from ..manifest import DatasetManifest


class PairingError(ValueError):
    pass


@dataclass(frozen=True)
class Triple:
    frame_id: str
    sim: str        # absolute paths
    aug: str
    mask: str
    mask_hash: str


@dataclass(frozen=True)
class PairedBatch:
    triples: tuple[Triple, ...]

    @property
    def frame_ids(self) -> list[str]:
        return [t.frame_id for t in self.triples]

    def __len__(self):
        return len(self.triples)


def _digest(path) -> str:
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


def pair_frames(sim: DatasetManifest, aug: DatasetManifest) -> list[Triple]:
    """Join the two manifests on frame id, checking that both carry the same mask."""
    a, b = sim.by_id(), aug.by_id()
    only_sim, only_aug = sorted(set(a) - set(b)), sorted(set(b) - set(a))
    if only_sim or only_aug:
        raise PairingError(f"frame ids differ: missing from {aug.name}: {only_sim}; "
                           f"missing from {sim.name}: {only_aug}")
    triples = []
    for fid in sorted(a):
        ra, rb = a[fid], b[fid]
        if not ra.binary or not rb.binary:
            raise PairingError(f"frame {fid} has no binary mask")
        ha, hb = _digest(sim.path(ra.binary)), _digest(aug.path(rb.binary))
        if ha != hb:
            raise PairingError(f"frame {fid}: masks differ between {sim.name} and {aug.name}")
        triples.append(Triple(fid, str(sim.path(ra.rgb)), str(aug.path(rb.rgb)), str(sim.path(ra.binary)), ha))
    return triples


def build_paired_batches(triples: list[Triple], triples_per_batch: int, seed: int, epoch: int = 0
                         ) -> list[PairedBatch]:
    """One epoch of batches in a seeded permutation; the last batch may be short."""
    if triples_per_batch < 1:
        raise ValueError("triples_per_batch must be >= 1")
    order = np.random.default_rng([seed, epoch]).permutation(len(triples))
    return [PairedBatch(tuple(triples[i] for i in order[s:s + triples_per_batch]))
            for s in range(0, len(order), triples_per_batch)]


def augment_triple(sim: np.ndarray, aug: np.ndarray, mask: np.ndarray, rng: np.random.Generator,
                   max_angle: float = 10.0):
    """Random flips and a small rotation, applied identically to both images and the mask."""
    if rng.random() < 0.5:
        sim, aug, mask = sim[:, ::-1], aug[:, ::-1], mask[:, ::-1]
    if rng.random() < 0.5:
        sim, aug, mask = sim[::-1], aug[::-1], mask[::-1]
    angle = rng.uniform(-max_angle, max_angle)
    sim = rotate(sim, angle, axes=(1, 0), reshape=False, order=1, mode="constant")
    aug = rotate(aug, angle, axes=(1, 0), reshape=False, order=1, mode="constant")
    mask = rotate(mask, angle, axes=(1, 0), reshape=False, order=0, mode="constant")
    return np.ascontiguousarray(sim), np.ascontiguousarray(aug), np.ascontiguousarray(mask)


class FrameCache:
    """Decoded images and masks, read once."""

    def __init__(self):
        self._rgb: dict[str, np.ndarray] = {}
        self._mask: dict[str, np.ndarray] = {}

    def rgb(self, path: str) -> np.ndarray:
        if path not in self._rgb:
            self._rgb[path] = io.read_rgb(path).astype(np.float32)
        return self._rgb[path]

    def mask(self, path: str) -> np.ndarray:
        if path not in self._mask:
            self._mask[path] = io.read_binary(path)
        return self._mask[path]


def batch_tensors(batch: PairedBatch, cache: FrameCache, rng: np.random.Generator | None = None):
    """Images ``(2B, 3, H, W)`` in [0, 1] (originals then translations) and masks ``(2B, H, W)``."""
    sims, augs, masks = [], [], []
    for t in batch.triples:
        s, a, m = cache.rgb(t.sim), cache.rgb(t.aug), cache.mask(t.mask)
        if s.shape != a.shape:
            raise PairingError(f"frame {t.frame_id}: image resolutions differ")
        if rng is not None:
            s, a, m = augment_triple(s, a, m, rng)
        sims.append(s)
        augs.append(a)
        masks.append(m)
    images = torch.from_numpy(np.stack(sims + augs)).permute(0, 3, 1, 2).contiguous()
    target = torch.from_numpy(np.stack(masks + masks).astype(np.int64))
    return images, target
