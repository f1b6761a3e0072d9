"""Insert object videos into scene videos via fake-pair supervised GANs."""

from .blending import BlendedPair, BlendMask, PairKind, TrainingBatch, blend, make_mask, make_training_batch
from .compositing import copy_paste, poisson_blend
from .datasets import (
    BoundingBox,
    ClipDataset,
    Frame,
    FrameSequence,
    PatchSpec,
    SpriteConfig,
    Track,
    crop_patch,
    load_annotations,
    load_dataset,
    make_sprite_dataset,
    sample_placement,
    save_annotations,
    save_dataset,
    scale_trajectory,
)
from .estimator import VideoObjectInserter
from .evaluation import SpriteAppearanceDetector, evaluate_insertions
from .inference import CompositeResult, InsertionRequest, composite_full_frame, render_insertion
from .losses import (
    LossReport,
    adversarial_term,
    baseline_objective,
    embedding_adversarial,
    image_objective,
    perceptual_distance,
    reconstruction_loss,
    video_objective,
)
from .metrics import OISReport, delta_mask, detector_recall, iou, ois_score
from .networks import GeneratorConfig, ModelBundle, combine_history_features, make_bundle, tile_embedding
from .training import (
    TrainConfig,
    TrainState,
    fit_image_stage,
    fit_video_stage,
    inject_history_noise,
    load_checkpoint,
    save_checkpoint,
    train_step_image,
    train_step_video,
)

__version__ = "0.1.0"

__all__ = [
    "BlendMask", "BlendedPair", "BoundingBox", "ClipDataset", "CompositeResult",
    "Frame", "FrameSequence", "GeneratorConfig", "InsertionRequest", "LossReport",
    "ModelBundle", "OISReport", "PairKind", "PatchSpec", "SpriteAppearanceDetector",
    "SpriteConfig", "Track", "TrainConfig", "TrainState", "TrainingBatch",
    "VideoObjectInserter", "adversarial_term", "baseline_objective", "blend",
    "combine_history_features", "composite_full_frame", "copy_paste", "crop_patch",
    "delta_mask", "detector_recall", "embedding_adversarial", "evaluate_insertions",
    "fit_image_stage", "fit_video_stage", "image_objective", "inject_history_noise",
    "iou", "load_annotations", "load_checkpoint", "load_dataset", "make_bundle",
    "make_mask", "make_sprite_dataset", "make_training_batch", "ois_score",
    "perceptual_distance", "poisson_blend", "reconstruction_loss", "render_insertion",
    "sample_placement", "save_annotations", "save_checkpoint", "save_dataset",
    "scale_trajectory", "tile_embedding", "train_step_image", "train_step_video",
    "video_objective",
]
