"""scikit-learn style estimator wrapping the two-stage training pipeline."""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .datasets import ClipDataset, PatchSpec
from .inference import CompositeResult, InsertionRequest, render_insertion
from .networks import GeneratorConfig
from .training import TrainConfig, fit_image_stage, fit_video_stage
from .validation import ValidationError


class VideoObjectInserter(BaseEstimator):
    """Learns to insert object videos into scene videos from unpaired data.

    ``fit`` trains the image-stage model on blended fake/real pairs and then
    (when ``video_iters > 0`` and ``history_len > 0``) the autoregressive
    video-stage model warm-started from it. ``transform`` renders insertion
    requests with the trained model.

    Parameters mirror the training knobs; see ``get_params`` for the list.
    """

    def __init__(
        self,
        patch_height: int = 128,
        patch_width: int = 64,
        base_filters: int = 64,
        n_levels: int = 4,
        history_len: int = 2,
        clip_len: int = 6,
        mask_frac_w: float = 0.5,
        mask_frac_h: float = 0.75,
        crop_margin: float = 0.1,
        lr: float = 2e-4,
        lambda_fake: float = 0.1,
        noise_std: float = 0.01,
        image_iters: int = 2000,
        video_iters: int = 1000,
        seq_len: int = 8,
        batch_size: int = 1,
        feather_px: int = 2,
        seed: int = 0,
    ):
        self.patch_height = patch_height
        self.patch_width = patch_width
        self.base_filters = base_filters
        self.n_levels = n_levels
        self.history_len = history_len
        self.clip_len = clip_len
        self.mask_frac_w = mask_frac_w
        self.mask_frac_h = mask_frac_h
        self.crop_margin = crop_margin
        self.lr = lr
        self.lambda_fake = lambda_fake
        self.noise_std = noise_std
        self.image_iters = image_iters
        self.video_iters = video_iters
        self.seq_len = seq_len
        self.batch_size = batch_size
        self.feather_px = feather_px
        self.seed = seed

    def _generator_config(self, history_len: int) -> GeneratorConfig:
        weights = tuple([1.0 / history_len] * history_len) if history_len else ()
        return GeneratorConfig(
            base_filters=self.base_filters,
            n_levels=self.n_levels,
            patch=PatchSpec(self.patch_height, self.patch_width),
            history_len=history_len,
            history_weights=weights,
            clip_len=self.clip_len,
            mask_frac_w=self.mask_frac_w,
            mask_frac_h=self.mask_frac_h,
            crop_margin=self.crop_margin,
        )

    def _train_config(self, iters: int) -> TrainConfig:
        return TrainConfig(
            lr=self.lr,
            lambda_fake=self.lambda_fake,
            noise_std=self.noise_std,
            iters=iters,
            seed=self.seed,
            seq_len=self.seq_len,
            batch_size=self.batch_size,
        )

    @staticmethod
    def _pools(X) -> tuple[list[ClipDataset], list[ClipDataset]]:
        if isinstance(X, tuple) and len(X) == 2:
            return list(X[0]), list(X[1])
        pool = list(X)
        if not all(isinstance(d, ClipDataset) for d in pool):
            raise ValidationError("fit expects ClipDataset lists")
        return pool, pool

    def fit(self, X, y=None):
        """Train on a pool of videos (or an (object_pool, scene_pool) tuple)."""
        pool_a, pool_b = self._pools(X)
        image_state = fit_image_stage(
            pool_a, pool_b,
            self._generator_config(0),
            self._train_config(self.image_iters),
        )
        self.image_state_ = image_state
        if self.video_iters > 0 and self.history_len > 0:
            self.state_ = fit_video_stage(
                pool_a, pool_b,
                self._generator_config(self.history_len),
                self._train_config(self.video_iters),
                init_from=image_state,
            )
        else:
            self.state_ = image_state
        self.bundle_ = self.state_.bundle
        return self

    def insert(self, request: InsertionRequest) -> CompositeResult:
        check_is_fitted(self, "bundle_")
        return render_insertion(self.bundle_, request, feather_px=self.feather_px)

    def transform(self, X) -> list[CompositeResult]:
        """Render a list of insertion requests."""
        check_is_fitted(self, "bundle_")
        return [self.insert(req) for req in X]

    def predict(self, X) -> list[CompositeResult]:
        return self.transform(X)
