"""Pixel-level insertion metrics and box IoU / detector recall."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import BoundingBox
from .validation import ValidationError, check_same_shape


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    score: float


@dataclass(frozen=True)
class OISReport:
    precision: float
    recall: float
    ois: float


def delta_mask(v: np.ndarray, u: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Pixels of the output that are closer (RGB Euclidean) to the object
    than to the region background; ties count as background."""
    check_same_shape(v, u, "v", "u")
    check_same_shape(v, r, "v", "r")
    d_obj = ((v - u) ** 2).sum(axis=-1)
    d_bg = ((v - r) ** 2).sum(axis=-1)
    return d_obj < d_bg


def ois_score(s_a: np.ndarray, s_delta: np.ndarray) -> OISReport:
    """Pixel precision/recall of inserted-object pixels against the object
    mask, combined into an F1-style object insertion score."""
    check_same_shape(s_a, s_delta, "s_a", "s_delta")
    a = np.asarray(s_a).astype(bool)
    d = np.asarray(s_delta).astype(bool)
    inter = float(np.logical_and(a, d).sum())
    precision = inter / float(d.sum()) if d.any() else 0.0
    recall = inter / float(a.sum()) if a.any() else 0.0
    ois = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return OISReport(precision=precision, recall=recall, ois=ois)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; disjoint boxes give 0."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def detector_recall(results, detector, iou_threshold: float = 0.5) -> float:
    """Fraction of inserted regions matched by a detection at IoU >= threshold.

    ``detector.detect(pixels, frame_pos) -> list[Detection]`` already applies
    its fixed score cutoff. Detector failures are re-raised with the frame
    position attached.
    """
    if not (0.0 < iou_threshold <= 1.0):
        raise ValidationError(f"iou_threshold must lie in (0, 1], got {iou_threshold}")
    total = 0
    hits = 0
    for result in results:
        for pos, (frame, region) in enumerate(zip(result.video.frames, result.per_frame_regions)):
            try:
                detections = detector.detect(frame.pixels, pos)
            except Exception as exc:
                raise RuntimeError(f"detector failed on frame {pos}: {exc}") from exc
            total += 1
            if any(iou(det.box, region) >= iou_threshold for det in detections):
                hits += 1
    if total == 0:
        raise ValidationError("no regions to evaluate")
    return hits / total
