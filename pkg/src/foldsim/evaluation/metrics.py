"""Mask overlap metrics and instance matching."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _as_binary(mask, name: str) -> np.ndarray:
    arr = np.asarray(mask)
    if arr.dtype == bool:
        return arr
    if not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} mask is not binary (values other than 0/1)")
    return arr.astype(bool)


def binary_iou(pred, gt) -> float:
    """Intersection over union of two binary masks; two empty masks score 1.0."""
    p, g = _as_binary(pred, "pred"), _as_binary(gt, "gt")
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {g.shape}")
    union = np.count_nonzero(p | g)
    if union == 0:
        return 1.0
    return np.count_nonzero(p & g) / union


@dataclass(frozen=True)
class Aggregate:
    mean: float  # percent
    std: float   # percent, population

    def __str__(self):
        return format_cell(self.mean, self.std)


def aggregate(ious) -> Aggregate:
    vals = np.asarray(list(ious), dtype=np.float64)
    if vals.size == 0:
        raise ValueError("cannot aggregate an empty list")
    return Aggregate(float(vals.mean() * 100.0), float(vals.std(ddof=0) * 100.0))


def format_number(v: float) -> str:
    """Two decimals with trailing zeros trimmed, keeping at least one: 44.3, 11.47, 0.0."""
    s = f"{v:.2f}".rstrip("0")
    return s + "0" if s.endswith(".") else s


def format_cell(mean: float, std: float) -> str:
    return f"{format_number(mean)} ± {format_number(std)}"


# --- instances --------------------------------------------------------------

@dataclass
class MatchResult:
    matches: list[tuple[int, int, float]] = field(default_factory=list)  # (pred id, gt id, IoU)
    unmatched_pred: list[int] = field(default_factory=list)
    unmatched_gt: list[int] = field(default_factory=list)

    @property
    def total_iou(self) -> float:
        return float(sum(m[2] for m in self.matches))

    def pairs(self) -> frozenset[tuple[int, int]]:
        return frozenset((p, g) for p, g, _ in self.matches)


def pairwise_iou(pred: np.ndarray, gt: np.ndarray):
    """IoU between every predicted and ground-truth instance: ``(pred ids, gt ids, matrix)``."""
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {gt.shape}")
    p_ids = np.unique(pred[pred > 0])
    g_ids = np.unique(gt[gt > 0])
    if p_ids.size == 0 or g_ids.size == 0:
        return p_ids, g_ids, np.zeros((p_ids.size, g_ids.size))
    p_area = np.array([np.count_nonzero(pred == i) for i in p_ids])
    g_area = np.array([np.count_nonzero(gt == j) for j in g_ids])
    # joint histogram of (pred, gt) labels gives all intersections at once
    p_idx = np.searchsorted(p_ids, pred)
    g_idx = np.searchsorted(g_ids, gt)
    both = (pred > 0) & (gt > 0)
    inter = np.zeros((p_ids.size, g_ids.size), dtype=np.int64)
    np.add.at(inter, (p_idx[both], g_idx[both]), 1)
    union = p_area[:, None] + g_area[None, :] - inter
    return p_ids, g_ids, inter / union


def match_instances(pred: np.ndarray, gt: np.ndarray, tau: float = 0.5) -> MatchResult:
    """Greedy one-to-one matching by decreasing IoU; ties go to the lower gt id, then lower pred id.

    Pairs below ``tau`` (or with no overlap) never match. For ``tau >= 0.5``
    every instance has at most one candidate partner above the threshold, so
    the greedy result is also a maximum-total-IoU matching; for smaller ``tau``
    the greedy total is at least half the optimum.
    """
    p_ids, g_ids, iou = pairwise_iou(pred, gt)
    cand = [(iou[i, j], int(g_ids[j]), int(p_ids[i]))
            for i in range(p_ids.size) for j in range(g_ids.size)
            if iou[i, j] > 0 and iou[i, j] >= tau]
    cand.sort(key=lambda c: (-c[0], c[1], c[2]))
    used_p, used_g = set(), set()
    out = MatchResult()
    for v, g, p in cand:
        if p in used_p or g in used_g:
            continue
        used_p.add(p)
        used_g.add(g)
        out.matches.append((p, g, float(v)))
    out.unmatched_pred = [int(i) for i in p_ids if int(i) not in used_p]
    out.unmatched_gt = [int(j) for j in g_ids if int(j) not in used_g]
    return out
