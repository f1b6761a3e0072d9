"""Render an object track into a scene video and composite full frames."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .blending import blend, make_mask, object_crop
from .datasets import (
    BoundingBox,
    ClipDataset,
    Frame,
    FrameSequence,
    crop_array,
    crop_mask_patch,
    crop_patch,
    scale_trajectory,
    write_frame_dir,
)
from .losses import rollout_sequence
from .networks import ModelBundle, to_chw
from .validation import ValidationError


@dataclass(frozen=True)
class InsertionRequest:
    """Insert ``object_id`` from ``source`` into ``target`` at ``placement``.

    ``frame_range`` is the half-open [start, end) frame window, read from
    both videos in lockstep. With ``static_placement`` the region stays at
    the placement box instead of following the object's scaled trajectory.
    """

    source: ClipDataset
    object_id: int
    target: ClipDataset
    placement: BoundingBox
    frame_range: tuple[int, int]
    static_placement: bool = False

    def __post_init__(self):
        start, end = self.frame_range
        if end <= start:
            raise ValidationError(f"empty frame range {self.frame_range}")
        h, w = self.target.frames.frame_shape
        if not self.placement.intersects_frame(h, w):
            raise ValidationError("placement does not intersect the target frames")
        for ds, label in ((self.source, "source"), (self.target, "target")):
            if end > len(ds.frames):
                raise ValidationError(
                    f"frame range {self.frame_range} exceeds {label} length {len(ds.frames)}"
                )
        self.source.track_by_id(self.object_id)


@dataclass
class CompositeResult:
    """Full composited frames plus the rendered patches and their regions."""

    video: FrameSequence
    per_frame_regions: list[BoundingBox]
    patches: FrameSequence
    truncated: bool = False
    warnings: list[str] = field(default_factory=list)


@dataclass
class InsertionInputs:
    """Per-frame model inputs for one insertion."""

    u_patches: np.ndarray       # (T,H,W,3) object crops
    r_patches: np.ndarray       # (T,H,W,3) region crops
    regions: list[BoundingBox]  # where each patch lands in the target
    source_masks: list[np.ndarray] | None  # oracle object masks at patch size
    truncated: bool


def plan_regions(request: InsertionRequest) -> tuple[list[BoundingBox], bool]:
    """Region boxes in the target video; truncated when the path leaves the ROI."""
    start, end = request.frame_range
    traj = request.source.track_by_id(request.object_id).segment(start, end)
    if request.static_placement:
        boxes = [request.placement] * (end - start)
    else:
        boxes = scale_trajectory(traj, request.placement.h, request.placement.center)
    h, w = request.target.frames.frame_shape
    roi = request.target.roi
    kept: list[BoundingBox] = []
    truncated = False
    for box in boxes:
        cx, cy = box.center
        if not (box.inside_frame(h, w) and roi.contains_point(cx, cy)):
            truncated = True
            break
        kept.append(box)
    if not kept:
        raise ValidationError("trajectory leaves the scene ROI at the first frame")
    return kept, truncated


def prepare_insertion_inputs(
    request: InsertionRequest, spec, margin: float, want_masks: bool = False
) -> InsertionInputs:
    regions, truncated = plan_regions(request)
    start, _ = request.frame_range
    pos0 = request.target.frames.frames[0].index
    track = request.source.track_by_id(request.object_id)
    u_list, r_list, masks = [], [], []
    for k, region in enumerate(regions):
        t = start + k
        u_list.append(object_crop(request.source, request.object_id, t, spec, margin))
        r_list.append(crop_patch(request.target.frames[t - pos0], region, spec).pixels)
        if want_masks:
            box = track.boxes[t].expanded(margin)
            masks.append(crop_mask_patch(request.source.mask_for(request.object_id, t), box, spec))
    return InsertionInputs(
        u_patches=np.stack(u_list),
        r_patches=np.stack(r_list),
        regions=regions,
        source_masks=masks if want_masks else None,
        truncated=truncated,
    )


def composite_array(scene: np.ndarray, patch: np.ndarray, region: BoundingBox,
                    feather_px: int = 2) -> np.ndarray:
    """Paste ``patch`` over ``scene`` at ``region`` with a linear border ramp.

    Pixels outside the region are bit-identical to the scene; with
    ``feather_px=0`` the interior is replaced exactly.
    """
    h, w = scene.shape[:2]
    if feather_px < 0:
        raise ValidationError("feather_px must be >= 0")
    if not region.inside_frame(h, w):
        raise ValidationError(f"region {region} not inside {h}x{w} scene")
    y0, x0 = int(round(region.y)), int(round(region.x))
    y1, x1 = int(round(region.y + region.h)), int(round(region.x + region.w))
    y1, x1 = min(max(y1, y0 + 1), h), min(max(x1, x0 + 1), w)
    ph, pw = y1 - y0, x1 - x0
    resized = crop_array(patch, BoundingBox(0, 0, patch.shape[1], patch.shape[0]), ph, pw)
    ramp = lambda n: np.minimum.reduce(
        [np.ones(n), (np.arange(n) + 1.0) / (feather_px + 1.0), (n - np.arange(n)) / (feather_px + 1.0)]
    )
    alpha = (np.minimum.outer(ramp(ph), ramp(pw)))[..., None]
    out = scene.copy()
    out[y0:y1, x0:x1] = np.clip(alpha * resized + (1.0 - alpha) * scene[y0:y1, x0:x1], 0.0, 1.0)
    return out.astype(scene.dtype, copy=False)


def composite_full_frame(scene: Frame, patch: Frame, region: BoundingBox,
                         feather_px: int = 2) -> Frame:
    out = composite_array(scene.pixels, patch.pixels, region, feather_px)
    return Frame(out.astype(np.float32), index=scene.index)


def render_insertion(
    bundle: ModelBundle,
    request: InsertionRequest,
    feather_px: int = 2,
    allow_untrained: bool = False,
) -> CompositeResult:
    """Blend, roll the generator over the frame range, and composite.

    History is the model's own previous outputs (no noise at inference), so
    repeated calls are bit-identical.
    """
    if bundle.step == 0 and not allow_untrained:
        raise ValidationError("bundle has never been trained; pass allow_untrained=True to force")
    cfg = bundle.config
    mask = make_mask(cfg.patch, cfg.mask_frac_w, cfg.mask_frac_h)
    inputs = prepare_insertion_inputs(request, cfg.patch, cfg.crop_margin)
    blends = np.stack(
        [blend(u, r, mask) for u, r in zip(inputs.u_patches, inputs.r_patches)]
    )
    x = torch.stack([to_chw(b) for b in blends]).unsqueeze(1)  # (T,1,3,H,W)
    with torch.no_grad():
        outs, _ = rollout_sequence(bundle, x)
    patches = np.transpose(outs[:, 0].numpy(), (0, 2, 3, 1)).astype(np.float32)

    start, _ = request.frame_range
    pos0 = request.target.frames.frames[0].index
    frames, patch_frames = [], []
    for k, region in enumerate(inputs.regions):
        scene = request.target.frames[start + k - pos0]
        frames.append(composite_full_frame(scene, Frame(patches[k], scene.index), region, feather_px))
        patch_frames.append(Frame(patches[k], index=start + k))
    warnings = ["trajectory left the scene ROI; output truncated"] if inputs.truncated else []
    return CompositeResult(
        video=FrameSequence(tuple(frames), fps=request.target.frames.fps),
        per_frame_regions=list(inputs.regions),
        patches=FrameSequence(tuple(patch_frames), fps=request.target.frames.fps),
        truncated=inputs.truncated,
        warnings=warnings,
    )


def write_composite_result(result: CompositeResult, out_dir) -> Path:
    """Frame directory plus a manifest recording per-frame regions."""
    out_dir = Path(out_dir)
    write_frame_dir(result.video, out_dir / "frames")
    write_frame_dir(result.patches, out_dir / "patches")
    manifest = {
        "truncated": result.truncated,
        "warnings": result.warnings,
        "regions": [
            {"frame": f.index, "box": [b.x, b.y, b.w, b.h]}
            for f, b in zip(result.video.frames, result.per_frame_regions)
        ],
    }
    path = out_dir / "result.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
