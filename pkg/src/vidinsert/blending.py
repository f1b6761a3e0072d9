"""Blending operator and construction of fake/real training pairs.

A "fake" pair blends an object crop with a random region crop and keeps the
object crop as reconstruction target; the "real" pair is the actual insertion
input with no ground-truth output. All three pair kinds feed one batch.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .datasets import BoundingBox, ClipDataset, PatchSpec, crop_patch, sample_placement
from .validation import ValidationError, check_unit_open


class PairKind(enum.Enum):
    FAKE_A = "fake_a"  # object from B blended onto a region from A
    FAKE_B = "fake_b"  # object from B blended onto a region from B
    REAL = "real"      # object from A blended onto a region from B


@dataclass(frozen=True)
class BlendMask:
    """Fixed binary mask (HxW, entries 0/1) defining the blended support."""

    values: np.ndarray

    def __post_init__(self):
        v = self.values
        if v.ndim != 2:
            raise ValidationError(f"BlendMask must be HxW, got shape {v.shape}")
        if not np.isin(np.unique(v), (0.0, 1.0)).all():
            raise ValidationError("BlendMask entries must be 0 or 1")
        if not v.any() or v.all():
            raise ValidationError("BlendMask needs at least one 1 and one 0")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class BlendedPair:
    """A blended input patch (or patch sequence) with its optional target."""

    input: np.ndarray
    target: np.ndarray | None
    kind: PairKind

    def __post_init__(self):
        if self.input.ndim not in (3, 4) or self.input.shape[-1] != 3:
            raise ValidationError(f"pair input must be [T x] H x W x 3, got {self.input.shape}")
        if (self.target is None) != (self.kind is PairKind.REAL):
            raise ValidationError("target must be present iff the pair is a fake pair")
        if self.target is not None and self.target.shape != self.input.shape:
            raise ValidationError("pair input and target must share one shape")

    @property
    def is_sequence(self) -> bool:
        return self.input.ndim == 4


@dataclass(frozen=True)
class TrainingBatch:
    """One real pair plus the two fake pairs, with their source crops.

    For video training every payload carries a leading time axis. The raw
    crops (``u_a``, ``u_b``, ``r_a``, ``r_b``) are kept because the baseline
    objectives and evaluation need them.
    """

    real: BlendedPair
    fake_a: BlendedPair
    fake_b: BlendedPair
    u_a: np.ndarray
    u_b: np.ndarray
    r_a: np.ndarray
    r_b: np.ndarray
    mask: BlendMask

    def __post_init__(self):
        if self.real.kind is not PairKind.REAL:
            raise ValidationError("real slot must hold a REAL pair")
        if self.fake_a.kind is not PairKind.FAKE_A or self.fake_b.kind is not PairKind.FAKE_B:
            raise ValidationError("fake slots must hold FAKE_A / FAKE_B pairs")
        shapes = {p.input.shape for p in (self.real, self.fake_a, self.fake_b)}
        if len(shapes) != 1:
            raise ValidationError(f"pair payloads disagree on shape: {shapes}")
        if self.real.input.shape[-3:-1] != self.mask.shape:
            raise ValidationError("mask size must match the patch size")

    @property
    def is_sequence(self) -> bool:
        return self.real.is_sequence

    @property
    def patch_shape(self) -> tuple[int, int]:
        return self.real.input.shape[-3:-1]


def make_mask(spec: PatchSpec, frac_w: float = 0.5, frac_h: float = 0.75) -> BlendMask:
    """Binary mask with ones in the centered ``frac_w x frac_h`` rectangle."""
    check_unit_open(frac_w, "frac_w")
    check_unit_open(frac_h, "frac_h")
    rect_w = int(round(frac_w * spec.width))
    rect_h = int(round(frac_h * spec.height))
    if rect_w < 1 or rect_h < 1 or rect_w >= spec.width or rect_h >= spec.height:
        raise ValidationError(f"mask rectangle {rect_w}x{rect_h} degenerate for {spec.shape}")
    m = np.zeros(spec.shape, dtype=np.float32)
    y0 = (spec.height - rect_h) // 2
    x0 = (spec.width - rect_w) // 2
    m[y0 : y0 + rect_h, x0 : x0 + rect_w] = 1.0
    return BlendMask(m)


def blend(u: np.ndarray, r: np.ndarray, m: BlendMask | np.ndarray) -> np.ndarray:
    """Corrupt region patch ``r`` with object patch ``u``: u*m/2 + r*(1 - m/2)."""
    mv = m.values if isinstance(m, BlendMask) else m
    if u.shape != r.shape:
        raise ValidationError(f"u/r shape mismatch: {u.shape} vs {r.shape}")
    if u.shape[:2] != mv.shape:
        raise ValidationError(f"mask shape {mv.shape} does not match patches {u.shape[:2]}")
    half = (mv / 2.0)[..., None]
    return (u * half + r * (1.0 - half)).astype(np.float32)


# 10% of the annotation box is kept around the object so crops carry context.
OBJECT_CROP_MARGIN = 0.1


def object_crop(ds: ClipDataset, track_id: int, frame_index: int, spec: PatchSpec,
                margin: float = OBJECT_CROP_MARGIN) -> np.ndarray:
    """Crop one object patch (annotation box grown by ``margin`` per side)."""
    box = ds.track_by_id(track_id).boxes.get(frame_index)
    if box is None:
        raise ValidationError(f"object {track_id} has no box at frame {frame_index}")
    pos = ds.frames.frames[0].index
    return crop_patch(ds.frames[frame_index - pos], box.expanded(margin), spec).pixels


def _pick_track_frame(ds: ClipDataset, rng: np.random.Generator) -> tuple[int, int]:
    if not ds.tracks:
        raise ValidationError(f"dataset {ds.name!r} has no tracks")
    track = ds.tracks[int(rng.integers(len(ds.tracks)))]
    frames = track.frame_indices()
    return track.object_id, frames[int(rng.integers(len(frames)))]


def _region_crop(ds: ClipDataset, roi: BoundingBox, frame_index: int, seed: int,
                 spec: PatchSpec) -> np.ndarray:
    box = sample_placement(ds.frames, roi, seed, ds.median_object_height(), spec)
    return crop_patch(ds.frames[frame_index], box, spec).pixels


def make_training_batch(
    video_a: ClipDataset,
    video_b: ClipDataset,
    roi_b: BoundingBox | None,
    rng_seed: int,
    spec: PatchSpec,
    mask: BlendMask,
    margin: float = OBJECT_CROP_MARGIN,
) -> TrainingBatch:
    """Build the three image pairs from one video pair, deterministically.

    ``roi_b`` restricts where region crops in the scene video are sampled;
    ``None`` falls back to the dataset ROI.
    """
    rng = np.random.default_rng(rng_seed)
    id_a, t_a = _pick_track_frame(video_a, rng)
    id_b, t_b = _pick_track_frame(video_b, rng)
    u_a = object_crop(video_a, id_a, t_a, spec, margin)
    u_b = object_crop(video_b, id_b, t_b, spec, margin)
    seed_ra = int(rng.integers(2**63))
    seed_rb = int(rng.integers(2**63))
    frame_ra = int(rng.integers(len(video_a.frames)))
    frame_rb = int(rng.integers(len(video_b.frames)))
    r_a = _region_crop(video_a, video_a.roi, frame_ra, seed_ra, spec)
    r_b = _region_crop(video_b, roi_b or video_b.roi, frame_rb, seed_rb, spec)
    return TrainingBatch(
        real=BlendedPair(blend(u_a, r_b, mask), None, PairKind.REAL),
        fake_a=BlendedPair(blend(u_b, r_a, mask), u_b, PairKind.FAKE_A),
        fake_b=BlendedPair(blend(u_b, r_b, mask), u_b, PairKind.FAKE_B),
        u_a=u_a, u_b=u_b, r_a=r_a, r_b=r_b, mask=mask,
    )


def _pick_track_segment(ds: ClipDataset, seq_len: int, rng: np.random.Generator) -> tuple[int, int]:
    """Pick (track_id, start) such that boxes exist on [start, start + seq_len)."""
    if not ds.tracks:
        raise ValidationError(f"dataset {ds.name!r} has no tracks")
    order = rng.permutation(len(ds.tracks))
    for i in order:
        track = ds.tracks[int(i)]
        frames = set(track.boxes)
        starts = [t for t in sorted(frames) if all(t + k in frames for k in range(seq_len))]
        if starts:
            return track.object_id, starts[int(rng.integers(len(starts)))]
    raise ValidationError(f"no track in {ds.name!r} spans {seq_len} consecutive frames")


def _region_track(ds: ClipDataset, roi: BoundingBox, seq_len: int, seed: int,
                  rng: np.random.Generator, spec: PatchSpec) -> np.ndarray:
    """Region crops that move along a randomly chosen object trajectory."""
    from .datasets import scale_trajectory

    placement = sample_placement(ds.frames, roi, seed, ds.median_object_height(), spec)
    guide_id, start = _pick_track_segment(ds, seq_len, rng)
    guide = ds.track_by_id(guide_id).segment(start, start + seq_len)
    h, w = ds.frames.frame_shape
    boxes = scale_trajectory(guide, placement.h, placement.center)
    frame0 = int(rng.integers(len(ds.frames) - seq_len + 1))
    crops = []
    for k, box in enumerate(boxes):
        if not box.intersects_frame(h, w):
            box = placement
        crops.append(crop_patch(ds.frames[frame0 + k], box, spec).pixels)
    return np.stack(crops)


def make_sequence_batch(
    video_a: ClipDataset,
    video_b: ClipDataset,
    roi_b: BoundingBox | None,
    seq_len: int,
    rng_seed: int,
    spec: PatchSpec,
    mask: BlendMask,
    margin: float = OBJECT_CROP_MARGIN,
) -> TrainingBatch:
    """Sequence version of :func:`make_training_batch` for video training."""
    if seq_len < 1:
        raise ValidationError("seq_len must be >= 1")
    rng = np.random.default_rng(rng_seed)
    id_a, start_a = _pick_track_segment(video_a, seq_len, rng)
    id_b, start_b = _pick_track_segment(video_b, seq_len, rng)
    u_a = np.stack([object_crop(video_a, id_a, start_a + k, spec, margin) for k in range(seq_len)])
    u_b = np.stack([object_crop(video_b, id_b, start_b + k, spec, margin) for k in range(seq_len)])
    seed_ra = int(rng.integers(2**63))
    seed_rb = int(rng.integers(2**63))
    r_a = _region_track(video_a, video_a.roi, seq_len, seed_ra, rng, spec)
    r_b = _region_track(video_b, roi_b or video_b.roi, seq_len, seed_rb, rng, spec)
    stack = lambda u, r: np.stack([blend(u[t], r[t], mask) for t in range(seq_len)])
    return TrainingBatch(
        real=BlendedPair(stack(u_a, r_b), None, PairKind.REAL),
        fake_a=BlendedPair(stack(u_b, r_a), u_b, PairKind.FAKE_A),
        fake_b=BlendedPair(stack(u_b, r_b), u_b, PairKind.FAKE_B),
        u_a=u_a, u_b=u_b, r_a=r_a, r_b=r_b, mask=mask,
    )
