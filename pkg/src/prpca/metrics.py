"""Tracking quality metrics: normalized center error, overlap score,
precision/success curves and per-sequence summaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BoundingBox",
    "SequenceMetrics",
    "center_error",
    "center_distance_px",
    "aos",
    "precision_curve",
    "success_curve",
    "summarize",
    "DEFAULT_PRECISION_THRESHOLDS",
    "DEFAULT_SUCCESS_THRESHOLDS",
]

DEFAULT_PRECISION_THRESHOLDS = tuple(float(t) for t in range(0, 51))
DEFAULT_SUCCESS_THRESHOLDS = tuple(round(0.05 * k, 2) for k in range(0, 21))


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned rectangle: top-left corner (x, y) and positive size."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box must have positive size, got w={self.w}, h={self.h}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def diagonal(self) -> float:
        return math.hypot(self.w, self.h)


@dataclass(frozen=True)
class SequenceMetrics:
    """Per-frame normalized center errors and overlap scores, plus means."""

    per_frame_eps0: tuple
    per_frame_aos: tuple
    mean_eps0: float
    mean_aos: float


def center_distance_px(pred: BoundingBox, gt: BoundingBox) -> float:
    """Euclidean distance between box centers, in pixels."""
    (px, py), (gx, gy) = pred.center, gt.center
    return math.hypot(px - gx, py - gy)


def center_error(pred: BoundingBox, gt: BoundingBox) -> float:
    """Center distance normalized by the ground-truth box diagonal."""
    return center_distance_px(pred, gt) / gt.diagonal


def aos(pred: BoundingBox, gt: BoundingBox) -> float:
    """Intersection-over-union of two axis-aligned rectangles, in [0, 1]."""
    ix = max(0.0, min(pred.x + pred.w, gt.x + gt.w) - max(pred.x, gt.x))
    iy = max(0.0, min(pred.y + pred.h, gt.y + gt.h) - max(pred.y, gt.y))
    inter = ix * iy
    union = pred.area + gt.area - inter
    return inter / union


def precision_curve(errors_px, thresholds=DEFAULT_PRECISION_THRESHOLDS) -> np.ndarray:
    """Fraction of frames with center error strictly below each threshold."""
    errors = np.asarray(errors_px, dtype=float)
    if errors.size == 0:
        raise ValueError("need at least one error value")
    thresholds = np.asarray(thresholds, dtype=float)
    return np.array([np.mean(errors < t) for t in thresholds])


def success_curve(aos_values, thresholds=DEFAULT_SUCCESS_THRESHOLDS) -> np.ndarray:
    """Fraction of frames with overlap strictly above each threshold."""
    values = np.asarray(aos_values, dtype=float)
    if values.size == 0:
        raise ValueError("need at least one overlap value")
    thresholds = np.asarray(thresholds, dtype=float)
    return np.array([np.mean(values > t) for t in thresholds])


def summarize(pred_boxes, gt_boxes) -> SequenceMetrics:
    """Per-frame normalized center error and overlap with their means."""
    pred_boxes = list(pred_boxes)
    gt_boxes = list(gt_boxes)
    if len(pred_boxes) != len(gt_boxes):
        raise ValueError(
            f"{len(pred_boxes)} predictions vs {len(gt_boxes)} ground-truth boxes"
        )
    if not pred_boxes:
        raise ValueError("need at least one frame")
    eps0 = tuple(center_error(p, g) for p, g in zip(pred_boxes, gt_boxes))
    overlaps = tuple(aos(p, g) for p, g in zip(pred_boxes, gt_boxes))
    return SequenceMetrics(
        per_frame_eps0=eps0,
        per_frame_aos=overlaps,
        mean_eps0=float(np.mean(eps0)),
        mean_aos=float(np.mean(overlaps)),
    )
