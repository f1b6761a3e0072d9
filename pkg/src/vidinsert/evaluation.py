"""Detection providers and the held-out insertion evaluation harness."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from scipy import ndimage

from .blending import blend, make_mask, object_crop
from .compositing import copy_paste, poisson_blend
from .datasets import (
    SPRITE_PALETTE,
    BoundingBox,
    ClipDataset,
    Frame,
    FrameSequence,
    PatchSpec,
    crop_mask_patch,
    crop_patch,
    sample_placement,
)
from .inference import CompositeResult, composite_full_frame
from .losses import rollout_sequence
from .metrics import Detection, delta_mask, detector_recall, ois_score
from .networks import to_chw
from .validation import ValidationError

EVAL_METHODS = ("model", "copy_paste", "poisson")


class OracleBoxDetector:
    """Echoes supplied ground-truth boxes; useful as a perfect detector."""

    def __init__(self, boxes_per_frame: list[list[BoundingBox]]):
        self.boxes_per_frame = boxes_per_frame

    def detect(self, pixels: np.ndarray, frame_pos: int) -> list[Detection]:
        return [Detection(b, 1.0) for b in self.boxes_per_frame[frame_pos]]


class EmptyDetector:
    def detect(self, pixels: np.ndarray, frame_pos: int) -> list[Detection]:
        return []


class SpriteAppearanceDetector:
    """Finds sprite-colored connected blobs; the score cutoff is fixed.

    Knows the sprite palette of the synthetic dataset, so it detects an
    inserted object only when the composite actually renders sprite-like
    pixels at the placement.
    """

    def __init__(self, palette: np.ndarray = SPRITE_PALETTE, tol: float = 0.3,
                 min_area: int = 6, score_threshold: float = 0.25):
        self.palette = np.asarray(palette, dtype=np.float64)
        self.tol = tol
        self.min_area = min_area
        self.score_threshold = score_threshold

    def detect(self, pixels: np.ndarray, frame_pos: int) -> list[Detection]:
        diff = pixels[None, ...].astype(np.float64) - self.palette[:, None, None, :]
        dist = np.sqrt((diff**2).sum(axis=-1)).min(axis=0)
        hit = dist < self.tol
        labels, count = ndimage.label(hit)
        detections = []
        for lbl in range(1, count + 1):
            ys, xs = np.nonzero(labels == lbl)
            if len(ys) < self.min_area:
                continue
            score = float(np.mean(1.0 - dist[ys, xs] / self.tol))
            if score < self.score_threshold:
                continue
            box = BoundingBox(
                float(xs.min()), float(ys.min()),
                float(xs.max() - xs.min() + 1), float(ys.max() - ys.min() + 1),
            )
            detections.append(Detection(box, score))
        return detections


# ---------------------------------------------------------------------------
# held-out insertion evaluation


@dataclass(frozen=True)
class InsertionCase:
    u: np.ndarray
    r: np.ndarray
    s_a: np.ndarray
    target: ClipDataset
    scene_frame: int
    placement: BoundingBox
    object_region: BoundingBox  # where the object itself lands (margin removed)


@dataclass
class EvalSummary:
    method: str
    n_samples: int
    mean_precision: float
    mean_recall: float
    mean_ois: float
    detector_recall: float | None
    records: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "n_samples": self.n_samples,
            "mean_precision": self.mean_precision,
            "mean_recall": self.mean_recall,
            "mean_ois": self.mean_ois,
            "detector_recall": self.detector_recall,
        }


def _shift_inside(box: BoundingBox, h: int, w: int) -> BoundingBox:
    """Translate a box so it lies fully inside an h x w frame."""
    x = min(max(box.x, 0.0), max(0.0, w - box.w))
    y = min(max(box.y, 0.0), max(0.0, h - box.h))
    return BoundingBox(x, y, min(box.w, w), min(box.h, h))


def sample_insertion_cases(
    pool: list[ClipDataset], n_samples: int, seed: int, spec: PatchSpec, margin: float
) -> list[InsertionCase]:
    """Deterministically sample (object crop, region crop, oracle mask) cases."""
    if len(pool) < 2:
        raise ValidationError("need at least two videos to sample insertions")
    rng = np.random.default_rng(seed)
    cases = []
    for _ in range(n_samples):
        si = int(rng.integers(len(pool)))
        ti = int(rng.integers(len(pool) - 1))
        ti = ti if ti < si else ti + 1
        src, tgt = pool[si], pool[ti]
        track = src.tracks[int(rng.integers(len(src.tracks)))]
        frames = track.frame_indices()
        t = frames[int(rng.integers(len(frames)))]
        box = track.boxes[t].expanded(margin)
        pos0 = src.frames.frames[0].index
        u = crop_patch(src.frames[t - pos0], box, spec).pixels
        s_a = crop_mask_patch(src.mask_for(track.object_id, t), box, spec)
        seed_p = int(rng.integers(2**63))
        placement = sample_placement(tgt.frames, tgt.roi, seed_p, tgt.median_object_height(), spec)
        placement = _shift_inside(placement, *tgt.frames.frame_shape)
        scene_frame = int(rng.integers(len(tgt.frames)))
        r = crop_patch(tgt.frames[scene_frame], placement, spec).pixels
        # the object occupies the placement shrunk by the crop margin
        shrink = 1.0 / (1.0 + 2.0 * margin)
        pcx, pcy = placement.center
        ow, oh = placement.w * shrink, placement.h * shrink
        object_region = BoundingBox(pcx - ow / 2.0, pcy - oh / 2.0, ow, oh)
        cases.append(InsertionCase(u=u, r=r, s_a=s_a, target=tgt,
                                   scene_frame=scene_frame, placement=placement,
                                   object_region=object_region))
    return cases


def render_patch(bundle, blended: np.ndarray) -> np.ndarray:
    """One-patch forward through the image or video generator path."""
    x = to_chw(blended).unsqueeze(0)
    with torch.no_grad():
        if bundle.config.history_len == 0:
            out, _ = bundle.generator(x)
            return np.transpose(out[0].numpy(), (1, 2, 0)).astype(np.float32)
        outs, _ = rollout_sequence(bundle, x.unsqueeze(0))
    return np.transpose(outs[0, 0].numpy(), (1, 2, 0)).astype(np.float32)


def _interior_mask(s_a: np.ndarray) -> np.ndarray:
    m = s_a.astype(np.uint8).copy()
    m[0, :] = m[-1, :] = 0
    m[:, 0] = m[:, -1] = 0
    return m


def evaluate_insertions(
    pool: list[ClipDataset],
    n_samples: int,
    seed: int,
    method: str = "model",
    bundle=None,
    spec: PatchSpec | None = None,
    margin: float = 0.1,
    mask_fracs: tuple[float, float] = (0.5, 0.75),
    detector=None,
    iou_threshold: float = 0.5,
    feather_px: int = 1,
) -> EvalSummary:
    """Score ``n_samples`` held-out insertions with oracle object masks.

    Computes per-sample pixel precision/recall/OIS against the oracle mask
    and, when a detector is given, the recall of the detector on the
    composited full frames.
    """
    if method not in EVAL_METHODS:
        raise ValidationError(f"method must be one of {EVAL_METHODS}, got {method!r}")
    if method == "model":
        if bundle is None:
            raise ValidationError("model evaluation needs a trained bundle")
        spec = bundle.config.patch
        margin = bundle.config.crop_margin
        mask_fracs = (bundle.config.mask_frac_w, bundle.config.mask_frac_h)
    elif spec is None:
        spec = PatchSpec()
    blend_mask = make_mask(spec, mask_fracs[0], mask_fracs[1])
    cases = sample_insertion_cases(pool, n_samples, seed, spec, margin)

    records = []
    composites = []
    for i, case in enumerate(cases):
        if method == "model":
            v = render_patch(bundle, blend(case.u, case.r, blend_mask))
        elif method == "copy_paste":
            v = copy_paste(case.u, case.r, case.s_a.astype(np.uint8))
        else:
            v = poisson_blend(case.u, case.r, _interior_mask(case.s_a))
        report = ois_score(case.s_a, delta_mask(v, case.u, case.r))
        records.append(
            {"index": i, "precision": report.precision, "recall": report.recall, "ois": report.ois}
        )
        scene = case.target.frames[case.scene_frame]
        composite = composite_full_frame(scene, Frame(v, scene.index), case.placement, feather_px)
        composites.append(
            CompositeResult(
                video=FrameSequence((composite,), fps=case.target.frames.fps),
                per_frame_regions=[case.object_region],
                patches=FrameSequence((Frame(v, scene.index),), fps=case.target.frames.fps),
            )
        )
    recall = None
    if detector is not None:
        recall = detector_recall(composites, detector, iou_threshold)
        for rec in records:
            comp = composites[rec["index"]]
            rec["matched"] = detector_recall([comp], detector, iou_threshold) > 0
    return EvalSummary(
        method=method,
        n_samples=n_samples,
        mean_precision=float(np.mean([r["precision"] for r in records])),
        mean_recall=float(np.mean([r["recall"] for r in records])),
        mean_ois=float(np.mean([r["ois"] for r in records])),
        detector_recall=recall,
        records=records,
    )


def background_drift(patches: np.ndarray, masks: list[np.ndarray]) -> float:
    """Mean per-frame L1 change outside the object mask over a rollout."""
    if len(patches) < 2:
        raise ValidationError("need at least two frames to measure drift")
    drifts = []
    for t in range(1, len(patches)):
        outside = ~(masks[t] | masks[t - 1])
        if not outside.any():
            continue
        drifts.append(float(np.abs(patches[t] - patches[t - 1])[outside].mean()))
    return float(np.mean(drifts))


def write_eval_report(summary: EvalSummary, path) -> None:
    """One JSON record per sample plus a final aggregate record."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in summary.records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        fh.write(json.dumps({"summary": summary.to_dict()}, sort_keys=True) + "\n")
