"""Instance overlays: matched predictions coloured by their ground-truth id, unmatched ones white."""

from __future__ import annotations

import numpy as np

from .metrics import MatchResult

PALETTE = np.array([
    [0.12, 0.47, 0.71], [1.00, 0.50, 0.05], [0.17, 0.63, 0.17], [0.84, 0.15, 0.16],
    [0.58, 0.40, 0.74], [0.55, 0.34, 0.29], [0.89, 0.47, 0.76], [0.74, 0.74, 0.13],
    [0.09, 0.75, 0.81], [0.40, 0.20, 0.60],
])
WHITE = np.array([1.0, 1.0, 1.0])


def color_for(gt_id: int) -> np.ndarray:
    return PALETTE[(gt_id - 1) % len(PALETTE)]


def render_overlay(image: np.ndarray, pred: np.ndarray, match: MatchResult, alpha: float = 0.55) -> np.ndarray:
    """Blend matched instances over ``image`` (float RGB in [0, 1]); paint unmatched ones solid white."""
    arr = np.asarray(image)
    image = arr / 255.0 if arr.dtype.kind in "ui" else arr.astype(np.float64)
    pred = np.asarray(pred)
    if image.shape[:2] != pred.shape:
        raise ValueError("image and instance mask are not aligned")
    out = image.copy()
    for p, g, _ in match.matches:
        sel = pred == p
        out[sel] = (1 - alpha) * image[sel] + alpha * color_for(g)
    for p in match.unmatched_pred:
        out[pred == p] = WHITE
    return out
