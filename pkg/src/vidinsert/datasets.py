"""Video/annotation data types, patch geometry, and the built-in sprite dataset.

Pixel convention: images are HxWx3 float arrays in [0, 1]; pixel (row i,
col j) covers the unit square [j, j+1) x [i, i+1), so a bounding box is a
continuous rectangle (x, y, w, h) with top-left corner (x, y).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .validation import (
    AnnotationParseError,
    ValidationError,
    check_image,
    check_positive,
)

# Placement boxes are sampled with heights uniform in this range times the
# median annotated object height.
PLACEMENT_HEIGHT_RANGE = (0.5, 1.5)

# Saturated sprite colors, deliberately far from the muted backgrounds so an
# appearance-based detector can separate them.
SPRITE_PALETTE = np.array(
    [
        [0.90, 0.12, 0.12],
        [0.10, 0.85, 0.15],
        [0.15, 0.25, 0.95],
        [0.95, 0.85, 0.10],
        [0.90, 0.15, 0.90],
        [0.10, 0.88, 0.88],
    ],
    dtype=np.float64,
)

SPRITE_SHAPES = ("ellipse", "rect", "triangle", "diamond")

DEFAULT_FPS = 10.0


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class Frame:
    """One RGB frame: HxWx3 pixels in [0, 1] plus its index in the video."""

    pixels: np.ndarray
    index: int = 0

    def __post_init__(self):
        check_image(self.pixels, "Frame.pixels")
        if self.index < 0:
            raise ValidationError(f"Frame.index must be non-negative, got {self.index}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class FrameSequence:
    """Ordered frames of one video; all frames share the same size."""

    frames: tuple[Frame, ...]
    fps: float = DEFAULT_FPS

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        check_positive(self.fps, "FrameSequence.fps")
        if not self.frames:
            raise ValidationError("FrameSequence must contain at least one frame")
        idx = [f.index for f in self.frames]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValidationError("frame indices must be strictly increasing")
        shapes = {f.pixels.shape for f in self.frames}
        if len(shapes) != 1:
            raise ValidationError(f"all frames must share one shape, got {shapes}")

    @classmethod
    def from_array(cls, arr: np.ndarray, fps: float = DEFAULT_FPS, start_index: int = 0):
        """Build a sequence from a (T, H, W, 3) array."""
        return cls(tuple(Frame(a, start_index + t) for t, a in enumerate(arr)), fps=fps)

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, i: int) -> Frame:
        return self.frames[i]

    @property
    def frame_shape(self) -> tuple[int, int]:
        return self.frames[0].pixels.shape[:2]

    def to_array(self) -> np.ndarray:
        return np.stack([f.pixels for f in self.frames])


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box with real-valued top-left corner and extents."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValidationError(f"box extents must be positive, got w={self.w}, h={self.h}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    def intersects_frame(self, height: int, width: int) -> bool:
        return self.x < width and self.x + self.w > 0 and self.y < height and self.y + self.h > 0

    def inside_frame(self, height: int, width: int) -> bool:
        return self.x >= 0 and self.y >= 0 and self.x + self.w <= width and self.y + self.h <= height

    def contains_point(self, px: float, py: float) -> bool:
        return self.x <= px <= self.x + self.w and self.y <= py <= self.y + self.h

    def expanded(self, margin_frac: float) -> "BoundingBox":
        """Box grown by ``margin_frac`` of its extent on every side."""
        return BoundingBox(
            self.x - margin_frac * self.w,
            self.y - margin_frac * self.h,
            self.w * (1 + 2 * margin_frac),
            self.h * (1 + 2 * margin_frac),
        )


@dataclass
class Track:
    """Per-frame boxes of one object identity."""

    object_id: int
    boxes: dict[int, BoundingBox] = field(default_factory=dict)

    def frame_indices(self) -> list[int]:
        return sorted(self.boxes)

    def segment(self, start: int, end: int) -> list[BoundingBox]:
        """Boxes for frames [start, end); every frame must be annotated."""
        missing = [t for t in range(start, end) if t not in self.boxes]
        if missing:
            raise ValidationError(
                f"track {self.object_id} missing boxes for frames {missing[:5]}"
            )
        return [self.boxes[t] for t in range(start, end)]


@dataclass(frozen=True)
class PatchSpec:
    """Size of the working patches all learning and rendering happens on."""

    height: int = 128
    width: int = 64

    def __post_init__(self):
        for name, v in (("height", self.height), ("width", self.width)):
            if v < 16 or v % 2 != 0:
                raise ValidationError(f"PatchSpec.{name} must be even and >= 16, got {v}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def aspect(self) -> float:
        return self.width / self.height


@dataclass
class ClipDataset:
    """One video plus its tracks, placement ROI, and optional object masks.

    ``masks`` maps object_id -> frame index -> boolean HxW mask.
    """

    frames: FrameSequence
    tracks: list[Track]
    roi: BoundingBox
    masks: dict[int, dict[int, np.ndarray]] | None = None
    name: str = ""

    def track_by_id(self, object_id: int) -> Track:
        for t in self.tracks:
            if t.object_id == object_id:
                return t
        raise ValidationError(f"no track with id {object_id} in dataset {self.name!r}")

    def median_object_height(self) -> float:
        heights = [b.h for t in self.tracks for b in t.boxes.values()]
        if not heights:
            raise ValidationError(f"dataset {self.name!r} has no annotated boxes")
        return float(np.median(heights))

    def mask_for(self, object_id: int, frame_index: int) -> np.ndarray:
        if self.masks is None or object_id not in self.masks:
            raise ValidationError(f"no masks for object {object_id} in dataset {self.name!r}")
        try:
            return self.masks[object_id][frame_index]
        except KeyError:
            raise ValidationError(
                f"object {object_id} has no mask at frame {frame_index}"
            ) from None


# ---------------------------------------------------------------------------
# annotations (MOT-challenge style CSV: frame,id,x,y,w,h)


def load_annotations(path) -> list[Track]:
    """Parse a ``frame,id,x,y,w,h`` CSV into tracks grouped by object id.

    Extra trailing columns are ignored. Malformed lines raise
    :class:`AnnotationParseError` naming the line number.
    """
    path = Path(path)
    tracks: dict[int, Track] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 6:
                raise AnnotationParseError(path, line_no, f"expected 6 fields, got {len(parts)}")
            try:
                frame = int(parts[0])
                obj_id = int(parts[1])
                x, y, w, h = (float(v) for v in parts[2:6])
            except ValueError as exc:
                raise AnnotationParseError(path, line_no, str(exc)) from None
            if w <= 0 or h <= 0:
                raise ValidationError(
                    f"{path}:{line_no}: box extents must be positive, got w={w}, h={h}"
                )
            if frame < 0:
                raise ValidationError(f"{path}:{line_no}: negative frame index {frame}")
            track = tracks.setdefault(obj_id, Track(object_id=obj_id))
            if frame in track.boxes:
                raise ValidationError(
                    f"{path}:{line_no}: duplicate box for object {obj_id} at frame {frame}"
                )
            track.boxes[frame] = BoundingBox(x, y, w, h)
    return [tracks[k] for k in sorted(tracks)]


def save_annotations(tracks: list[Track], path) -> None:
    """Write tracks in the CSV format read by :func:`load_annotations`.

    Floats are written with ``repr`` so a save/load round trip is exact.
    """
    rows = []
    for track in tracks:
        for frame in track.frame_indices():
            b = track.boxes[frame]
            rows.append((frame, track.object_id, b.x, b.y, b.w, b.h))
    rows.sort()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for frame, obj_id, x, y, w, h in rows:
            fh.write(f"{frame},{obj_id},{x!r},{y!r},{w!r},{h!r}\n")


# ---------------------------------------------------------------------------
# patch geometry


def _bilinear_sample(img: np.ndarray, sy: np.ndarray, sx: np.ndarray) -> np.ndarray:
    """Sample ``img`` at real pixel-center coordinates with edge replication."""
    h, w = img.shape[:2]
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    fy = (sy - y0)[..., None] if img.ndim == 3 else sy - y0
    fx = (sx - x0)[..., None] if img.ndim == 3 else sx - x0

    def at(yy, xx):
        return img[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]

    top = at(y0, x0) * (1 - fx) + at(y0, x0 + 1) * fx
    bot = at(y0 + 1, x0) * (1 - fx) + at(y0 + 1, x0 + 1) * fx
    return top * (1 - fy) + bot * fy


def crop_array(img: np.ndarray, box: BoundingBox, out_height: int, out_width: int) -> np.ndarray:
    """Crop ``box`` from an HxW[xC] array and resample to the given size.

    Bilinear resampling on pixel centers; coordinates outside the source are
    clamped, which replicates edge pixels.
    """
    h, w = img.shape[:2]
    if not box.intersects_frame(h, w):
        raise ValidationError(f"box {box} lies fully outside a {h}x{w} frame")
    jj = np.arange(out_width, dtype=np.float64)
    ii = np.arange(out_height, dtype=np.float64)
    sx = box.x + (jj + 0.5) * (box.w / out_width) - 0.5
    sy = box.y + (ii + 0.5) * (box.h / out_height) - 0.5
    sx, sy = np.meshgrid(sx, sy)
    out = _bilinear_sample(img.astype(np.float64, copy=False), sy, sx)
    return out.astype(img.dtype, copy=False) if img.dtype == np.float64 else out


def crop_patch(frame: Frame, box: BoundingBox, spec: PatchSpec) -> Frame:
    """Crop a bounding box from a frame into a patch of ``spec`` size."""
    out = crop_array(frame.pixels, box, spec.height, spec.width)
    return Frame(np.clip(out, 0.0, 1.0).astype(np.float32), index=frame.index)


def crop_mask_patch(mask: np.ndarray, box: BoundingBox, spec: PatchSpec) -> np.ndarray:
    """Crop a boolean mask along the same geometry as :func:`crop_patch`."""
    out = crop_array(mask.astype(np.float64), box, spec.height, spec.width)
    return out > 0.5


def sample_placement(
    scene: FrameSequence,
    roi: BoundingBox,
    rng_seed: int,
    ref_height: float,
    spec: PatchSpec,
) -> BoundingBox:
    """Sample a placement box with its center inside ``roi``.

    Height is uniform in ``PLACEMENT_HEIGHT_RANGE`` times ``ref_height`` (the
    median annotated object height); aspect ratio is fixed to the patch spec.
    Deterministic in ``rng_seed``.
    """
    h, w = scene.frame_shape
    if not roi.inside_frame(h, w):
        raise ValidationError(f"roi {roi} not inside {h}x{w} frame bounds")
    check_positive(ref_height, "ref_height")
    lo, hi = PLACEMENT_HEIGHT_RANGE
    min_h = lo * ref_height
    if roi.h < min_h or roi.w < min_h * spec.aspect:
        raise ValidationError(
            f"roi {roi} smaller than the minimum placement box "
            f"({min_h * spec.aspect:.1f}x{min_h:.1f})"
        )
    rng = np.random.default_rng(rng_seed)
    box_h = rng.uniform(lo, hi) * ref_height
    box_w = box_h * spec.aspect
    cx = roi.x + rng.uniform(0.0, 1.0) * roi.w
    cy = roi.y + rng.uniform(0.0, 1.0) * roi.h
    return BoundingBox(cx - box_w / 2.0, cy - box_h / 2.0, box_w, box_h)


def scale_trajectory(
    traj: list[BoundingBox], target_height: float, anchor: tuple[float, float]
) -> list[BoundingBox]:
    """Rescale a box trajectory so steps stay proportional to object height.

    All box extents and per-frame center displacements are scaled by
    ``s = target_height / traj[0].h``; the first center moves to ``anchor``.
    """
    if not traj:
        raise ValidationError("trajectory must be non-empty")
    check_positive(target_height, "target_height")
    s = target_height / traj[0].h
    out = []
    cx, cy = anchor
    prev = traj[0].center
    for i, box in enumerate(traj):
        if i > 0:
            cur = box.center
            cx += s * (cur[0] - prev[0])
            cy += s * (cur[1] - prev[1])
            prev = cur
        out.append(BoundingBox(cx - s * box.w / 2.0, cy - s * box.h / 2.0, s * box.w, s * box.h))
    return out


# ---------------------------------------------------------------------------
# synthetic sprite dataset


@dataclass(frozen=True)
class SpriteConfig:
    n_videos: int = 8
    n_frames: int = 24
    frame_height: int = 96
    frame_width: int = 128
    n_objects: int = 2
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("n_videos", "n_frames", "frame_height", "frame_width"):
            check_positive(getattr(self, name), f"SpriteConfig.{name}")
        if self.n_objects < 0:
            raise ValidationError("SpriteConfig.n_objects must be >= 0")
        if self.frame_height < 32 or self.frame_width < 32:
            raise ValidationError("sprite frames must be at least 32x32")


def _reflect(value: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Fold values into [lo, hi] by reflecting at the boundaries."""
    span = hi - lo
    v = np.mod(value - lo, 2 * span)
    return lo + np.where(v > span, 2 * span - v, v)


def _shape_mask(shape: str, h: int, w: int, cy: float, cx: float, ry: float, rx: float) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    # centers of pixels
    dy = (yy + 0.5 - cy) / ry
    dx = (xx + 0.5 - cx) / rx
    if shape == "ellipse":
        return dy * dy + dx * dx <= 1.0
    if shape == "rect":
        return (np.abs(dy) <= 1.0) & (np.abs(dx) <= 1.0)
    if shape == "triangle":
        # apex at the top, base at the bottom
        return (np.abs(dy) <= 1.0) & (np.abs(dx) <= (dy + 1.0) / 2.0)
    if shape == "diamond":
        return np.abs(dy) + np.abs(dx) <= 1.0
    raise ValidationError(f"unknown sprite shape {shape!r}")


def _background_video(rng: np.random.Generator, n_frames: int, h: int, w: int) -> np.ndarray:
    """Muted, slowly drifting texture: coarse noise upsampled then translated."""
    pad = n_frames + 2
    gh, gw = 7, 9
    gray = rng.uniform(0.30, 0.55, size=(gh, gw))
    tint = rng.uniform(-0.06, 0.06, size=(gh, gw, 3))
    grid = np.clip(gray[..., None] + tint, 0.05, 0.8)
    big = crop_array(grid, BoundingBox(0, 0, gw, gh), h + 2 * pad, w + 2 * pad)
    dy, dx = rng.integers(-1, 2, size=2)
    frames = np.empty((n_frames, h, w, 3), dtype=np.float64)
    for t in range(n_frames):
        oy = pad + int(dy) * t
        ox = pad + int(dx) * t
        frames[t] = big[oy : oy + h, ox : ox + w]
    return frames


def make_sprite_dataset(config: SpriteConfig) -> list[ClipDataset]:
    """Generate videos of colored sprites moving over drifting textures.

    Trajectories are linear plus a sinusoid, reflected off the frame borders
    so sprites stay fully visible. Emits exact masks and mask-tight boxes.
    Deterministic in ``config.rng_seed``; pixels are quantized to the 8-bit
    grid so in-memory data matches what a PNG round trip produces.
    """
    rng = np.random.default_rng(config.rng_seed)
    h, w = config.frame_height, config.frame_width
    datasets = []
    for vid in range(config.n_videos):
        frames = _background_video(rng, config.n_frames, h, w)
        tracks: list[Track] = []
        masks: dict[int, dict[int, np.ndarray]] = {}
        for obj in range(config.n_objects):
            obj_id = obj + 1
            color = SPRITE_PALETTE[rng.integers(len(SPRITE_PALETTE))]
            shape = SPRITE_SHAPES[rng.integers(len(SPRITE_SHAPES))]
            ry = rng.uniform(0.09, 0.15) * h
            rx = ry * rng.uniform(0.45, 0.6)
            tt = np.arange(config.n_frames, dtype=np.float64)
            # linear drift plus a sinusoidal sway, folded into the safe region
            p0 = rng.uniform(0.25, 0.75, size=2) * (w, h)
            vel = rng.uniform(-1.2, 1.2, size=2)
            amp = rng.uniform(0.0, 3.0, size=2)
            freq = rng.uniform(0.15, 0.5, size=2)
            phase = rng.uniform(0.0, 2 * math.pi, size=2)
            cx = _reflect(p0[0] + vel[0] * tt + amp[0] * np.sin(freq[0] * tt + phase[0]), rx + 1, w - rx - 1)
            cy = _reflect(p0[1] + vel[1] * tt + amp[1] * np.sin(freq[1] * tt + phase[1]), ry + 1, h - ry - 1)
            shade = rng.uniform(0.85, 1.0)
            track = Track(object_id=obj_id)
            obj_masks: dict[int, np.ndarray] = {}
            for t in range(config.n_frames):
                m = _shape_mask(shape, h, w, cy[t], cx[t], ry, rx)
                if not m.any():
                    continue
                frames[t][m] = color * shade
                ys, xs = np.nonzero(m)
                track.boxes[t] = BoundingBox(
                    float(xs.min()), float(ys.min()),
                    float(xs.max() - xs.min() + 1), float(ys.max() - ys.min() + 1),
                )
                obj_masks[t] = m
            if track.boxes:
                tracks.append(track)
                masks[obj_id] = obj_masks
        pixels = np.round(np.clip(frames, 0.0, 1.0) * 255.0) / 255.0
        roi = BoundingBox(w * 0.08, h * 0.08, w * 0.84, h * 0.84)
        datasets.append(
            ClipDataset(
                frames=FrameSequence.from_array(pixels.astype(np.float32)),
                tracks=tracks,
                roi=roi,
                masks=masks,
                name=f"sprite{vid:04d}",
            )
        )
    return datasets


# ---------------------------------------------------------------------------
# on-disk layout: frame directories, mask directories, dataset manifest


def write_frame_dir(seq: FrameSequence, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for f in seq.frames:
        img = Image.fromarray(np.round(f.pixels * 255.0).astype(np.uint8), mode="RGB")
        img.save(out_dir / f"{f.index:06d}.png")


def read_frame_dir(frame_dir, fps: float = DEFAULT_FPS) -> FrameSequence:
    frame_dir = Path(frame_dir)
    paths = sorted(frame_dir.glob("*.png"))
    if not paths:
        raise ValidationError(f"no PNG frames found under {frame_dir}")
    frames = []
    for p in paths:
        arr = np.asarray(Image.open(p).convert("RGB"), dtype=np.float32) / 255.0
        frames.append(Frame(arr, index=int(p.stem)))
    return FrameSequence(tuple(frames), fps=fps)


def _write_mask_dirs(masks: dict[int, dict[int, np.ndarray]], out_dir) -> None:
    out_dir = Path(out_dir)
    for obj_id, per_frame in masks.items():
        d = out_dir / f"obj{obj_id:04d}"
        d.mkdir(parents=True, exist_ok=True)
        for t, m in sorted(per_frame.items()):
            Image.fromarray((m.astype(np.uint8) * 255), mode="L").save(d / f"{t:06d}.png")


def _read_mask_dirs(mask_dir) -> dict[int, dict[int, np.ndarray]]:
    mask_dir = Path(mask_dir)
    masks: dict[int, dict[int, np.ndarray]] = {}
    for d in sorted(mask_dir.glob("obj*")):
        obj_id = int(d.name[3:])
        per_frame = {}
        for p in sorted(d.glob("*.png")):
            per_frame[int(p.stem)] = np.asarray(Image.open(p).convert("L")) > 127
        masks[obj_id] = per_frame
    return masks


def save_dataset(datasets: list[ClipDataset], out_dir) -> Path:
    """Write videos, annotations, masks and a JSON manifest; returns its path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for ds in datasets:
        name = ds.name or f"video{len(entries):04d}"
        write_frame_dir(ds.frames, out_dir / "videos" / name)
        ann_path = out_dir / "annotations" / f"{name}.csv"
        ann_path.parent.mkdir(parents=True, exist_ok=True)
        save_annotations(ds.tracks, ann_path)
        entry = {
            "name": name,
            "frames_dir": f"videos/{name}",
            "annotations": f"annotations/{name}.csv",
            "roi": [ds.roi.x, ds.roi.y, ds.roi.w, ds.roi.h],
            "fps": ds.frames.fps,
        }
        if ds.masks is not None:
            _write_mask_dirs(ds.masks, out_dir / "masks" / name)
            entry["masks_dir"] = f"masks/{name}"
        entries.append(entry)
    manifest = out_dir / "manifest.json"
    with open(manifest, "w", encoding="utf-8") as fh:
        json.dump({"videos": entries}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_dataset(manifest_path) -> list[ClipDataset]:
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    datasets = []
    for entry in manifest["videos"]:
        frames = read_frame_dir(root / entry["frames_dir"], fps=entry.get("fps", DEFAULT_FPS))
        tracks = load_annotations(root / entry["annotations"])
        roi = BoundingBox(*entry["roi"])
        masks = _read_mask_dirs(root / entry["masks_dir"]) if "masks_dir" in entry else None
        datasets.append(
            ClipDataset(frames=frames, tracks=tracks, roi=roi, masks=masks, name=entry["name"])
        )
    return datasets
