"""Command-line entry point wiring data synthesis, training, insertion,
evaluation, and baseline runs.

Every command honors ``--seed`` and ``--config`` and writes its outputs
under ``--out`` (prefixed by the ``VIDINSERT_OUT`` environment variable when
set and the path is relative). Logs go to stderr, one summary line per
command to stdout.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import datasets as ds
from .blending import make_mask
from .config import RunConfig, load_run_config
from .datasets import BoundingBox, PatchSpec, SpriteConfig, load_dataset, make_sprite_dataset, save_dataset
from .evaluation import (
    OracleBoxDetector,
    SpriteAppearanceDetector,
    evaluate_insertions,
    write_eval_report,
)
from .inference import InsertionRequest, render_insertion, write_composite_result
from .losses import BASELINE_KINDS
from .networks import GeneratorConfig
from .training import TrainConfig, fit_image_stage, fit_video_stage, load_checkpoint, save_checkpoint
from .validation import CheckpointError, ValidationError

log = logging.getLogger("vidinsert")

COMMANDS = ("synth-data", "train-image", "train-video", "insert", "eval-ois", "eval-recall", "baseline")


def _resolve_out(out: str) -> Path:
    root = os.environ.get("VIDINSERT_OUT")
    path = Path(out)
    if root and not path.is_absolute():
        path = Path(root) / path
    path.mkdir(parents=True, exist_ok=True)
    return path


def _generator_config(cfg: RunConfig, history_len: int) -> GeneratorConfig:
    model = cfg.section("model")
    patch = cfg.section("patch")
    mask = cfg.section("mask")
    n = history_len
    return GeneratorConfig(
        base_filters=model["base_filters"],
        n_levels=model["n_levels"],
        patch=PatchSpec(patch["height"], patch["width"]),
        history_len=n,
        history_weights=tuple([1.0 / n] * n) if n else (),
        clip_len=model["clip_len"],
        mask_frac_w=mask["frac_w"],
        mask_frac_h=mask["frac_h"],
        crop_margin=model["crop_margin"],
    )


def _train_config(cfg: RunConfig, seed: int, iters: int | None) -> TrainConfig:
    train = cfg.section("train")
    return TrainConfig(
        lr=train["lr"],
        beta1=train["beta1"],
        beta2=train["beta2"],
        batch_size=train["batch_size"],
        lambda_fake=train["lambda_fake"],
        noise_std=train["noise_std"],
        iters=train["iters"] if iters is None else iters,
        seed=seed,
        seq_len=train["seq_len"],
    )


def _cmd_synth_data(args, cfg: RunConfig) -> str:
    data = cfg.section("data")
    sprite_cfg = SpriteConfig(
        n_videos=args.n_videos or data["n_videos"],
        n_frames=data["n_frames"],
        frame_height=data["frame_height"],
        frame_width=data["frame_width"],
        n_objects=data["n_objects"],
        rng_seed=args.seed,
    )
    out = _resolve_out(args.out)
    manifest = save_dataset(make_sprite_dataset(sprite_cfg), out)
    return f"synth-data: {sprite_cfg.n_videos} videos x {sprite_cfg.n_frames} frames -> {manifest}"


def _cmd_train_image(args, cfg: RunConfig) -> str:
    pool = load_dataset(args.data)
    out = _resolve_out(args.out)
    gen_cfg = _generator_config(cfg, history_len=0)
    train_cfg = _train_config(cfg, args.seed, args.iters)
    state = fit_image_stage(pool, pool, gen_cfg, train_cfg, objective="ours",
                            log_path=out / "train_log.jsonl")
    ckpt = out / "image.ckpt"
    save_checkpoint(state, ckpt)
    return f"train-image: {train_cfg.iters} iters, step {state.step} -> {ckpt}"


def _cmd_train_video(args, cfg: RunConfig) -> str:
    pool = load_dataset(args.data)
    out = _resolve_out(args.out)
    model = cfg.section("model")
    gen_cfg = _generator_config(cfg, history_len=model["history_len"])
    train_cfg = _train_config(cfg, args.seed, args.iters)
    init_state = load_checkpoint(args.init) if args.init else None
    state = fit_video_stage(pool, pool, gen_cfg, train_cfg, init_from=init_state,
                            log_path=out / "train_log.jsonl")
    ckpt = out / "video.ckpt"
    save_checkpoint(state, ckpt)
    return f"train-video: {train_cfg.iters} iters, step {state.step} -> {ckpt}"


def _default_placement(target, spec: PatchSpec) -> BoundingBox:
    h = target.median_object_height()
    w = h * spec.aspect
    cx, cy = target.roi.center
    return BoundingBox(cx - w / 2, cy - h / 2, w, h)


def _cmd_insert(args, cfg: RunConfig) -> str:
    pool = load_dataset(args.data)
    out = _resolve_out(args.out)
    section = cfg.section("insert")
    state = load_checkpoint(args.checkpoint)
    source = pool[args.source_index if args.source_index is not None else section["source_index"]]
    target = pool[args.target_index if args.target_index is not None else section["target_index"]]
    object_id = args.object_id or section["object_id"] or source.tracks[0].object_id
    if args.placement:
        x, y, w, h = (float(v) for v in args.placement.split(","))
        placement = BoundingBox(x, y, w, h)
    else:
        placement = _default_placement(target, state.bundle.config.patch)
    start = args.frame_start if args.frame_start is not None else section["frame_start"]
    end = args.frame_end if args.frame_end is not None else section["frame_end"]
    request = InsertionRequest(
        source=source, object_id=object_id, target=target, placement=placement,
        frame_range=(start, end), static_placement=args.static or section["static"],
    )
    result = render_insertion(state.bundle, request, feather_px=section["feather_px"])
    manifest = write_composite_result(result, out)
    note = " (truncated)" if result.truncated else ""
    return f"insert: {len(result.video)} frames{note} -> {manifest}"


def _make_detector(name: str, cases_placements=None):
    if name == "sprite":
        return SpriteAppearanceDetector()
    if name == "oracle":
        return OracleBoxDetector(cases_placements or [])
    raise ValidationError(f"unknown detector {name!r} (choose sprite or oracle)")


def _cmd_eval(args, cfg: RunConfig, want_recall: bool) -> str:
    pool = load_dataset(args.data)
    out = _resolve_out(args.out)
    section = cfg.section("eval")
    n_samples = args.n_samples or section["n_samples"]
    detector = None
    if want_recall:
        detector = _make_detector(args.detector or section["detector"])
    if args.method == "model":
        state = load_checkpoint(args.checkpoint)
        summary = evaluate_insertions(
            pool, n_samples, args.seed, method="model", bundle=state.bundle,
            detector=detector, iou_threshold=section["iou_threshold"],
            feather_px=section["feather_px"],
        )
    else:
        patch = cfg.section("patch")
        mask = cfg.section("mask")
        summary = evaluate_insertions(
            pool, n_samples, args.seed, method=args.method,
            spec=PatchSpec(patch["height"], patch["width"]),
            margin=cfg.get("model", "crop_margin"),
            mask_fracs=(mask["frac_w"], mask["frac_h"]),
            detector=detector, iou_threshold=section["iou_threshold"],
            feather_px=section["feather_px"],
        )
    name = "eval-recall" if want_recall else "eval-ois"
    report = out / f"{name}.jsonl"
    write_eval_report(summary, report)
    if want_recall:
        return f"{name}: method={summary.method} recall={summary.detector_recall:.4f} -> {report}"
    return (
        f"{name}: method={summary.method} OIS={summary.mean_ois:.4f} "
        f"P={summary.mean_precision:.4f} R={summary.mean_recall:.4f} -> {report}"
    )


def _cmd_baseline(args, cfg: RunConfig) -> str:
    pool = load_dataset(args.data)
    out = _resolve_out(args.out)
    gen_cfg = _generator_config(cfg, history_len=0)
    train_cfg = _train_config(cfg, args.seed, args.iters)
    state = fit_image_stage(pool, pool, gen_cfg, train_cfg, objective=args.kind,
                            log_path=out / "train_log.jsonl")
    ckpt = out / f"baseline_{args.kind}.ckpt"
    save_checkpoint(state, ckpt)
    return f"baseline: kind={args.kind} {train_cfg.iters} iters -> {ckpt}"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vidinsert", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="|".join(COMMANDS))

    def common(p, data=True):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", default=None, help="sectioned key=value config file")
        p.add_argument("--out", required=True, help="output directory")
        if data:
            p.add_argument("--data", required=True, help="dataset manifest path")

    p = sub.add_parser("synth-data", help="generate the synthetic sprite dataset")
    common(p, data=False)
    p.add_argument("--n-videos", type=int, default=None)

    p = sub.add_parser("train-image", help="train the image-stage model")
    common(p)
    p.add_argument("--iters", type=int, default=None)

    p = sub.add_parser("train-video", help="train the video-stage model")
    common(p)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--init", default=None, help="image-stage checkpoint to warm start from")

    p = sub.add_parser("insert", help="insert an object track into a scene video")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--object-id", type=int, default=None)
    p.add_argument("--source-index", type=int, default=None)
    p.add_argument("--target-index", type=int, default=None)
    p.add_argument("--frame-start", type=int, default=None)
    p.add_argument("--frame-end", type=int, default=None)
    p.add_argument("--placement", default=None, help="x,y,w,h box in the target video")
    p.add_argument("--static", action="store_true", help="keep the placement fixed")

    for name in ("eval-ois", "eval-recall"):
        p = sub.add_parser(name, help=f"{name} on held-out insertions")
        common(p)
        p.add_argument("--checkpoint", default=None)
        p.add_argument("--method", default="model", choices=("model", "copy_paste", "poisson"))
        p.add_argument("--n-samples", type=int, default=None)
        p.add_argument("--detector", default=None, choices=("sprite", "oracle"))

    p = sub.add_parser("baseline", help="train a GAN baseline objective")
    common(p)
    p.add_argument("--kind", required=True, choices=BASELINE_KINDS)
    p.add_argument("--iters", type=int, default=None)
    return parser


def run(argv: list[str]) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_run_config(args.config)
        if args.command in ("eval-ois", "eval-recall") and args.method == "model" and not args.checkpoint:
            parser.error(f"{args.command} with --method model requires --checkpoint")
        handler = {
            "synth-data": _cmd_synth_data,
            "train-image": _cmd_train_image,
            "train-video": _cmd_train_video,
            "insert": _cmd_insert,
            "baseline": _cmd_baseline,
        }
        if args.command in handler:
            summary = handler[args.command](args, cfg)
        else:
            summary = _cmd_eval(args, cfg, want_recall=args.command == "eval-recall")
    except (ValidationError, CheckpointError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    print(summary)
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))
