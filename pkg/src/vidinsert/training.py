"""Optimization loops for the image and video stages and for baselines.

Discriminators update first on the current generator outputs, then the
generator updates, in strict 1:1 alternation. Every source of randomness is
owned by the train state (one numpy generator for sampling decisions, one
torch generator for noise), so runs are reproducible from (seed, config,
data) and checkpoints resume bit-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .blending import make_mask, make_sequence_batch, make_training_batch
from .checkpoint import load_container, save_container
from .datasets import ClipDataset
from .losses import (
    LossReport,
    RandomConvFeatures,
    baseline_disc_terms,
    baseline_forward,
    baseline_gen_terms,
    draw_video_indices,
    generator_forward_kinds,
    image_batch_tensors,
    image_disc_terms,
    image_gen_terms,
    sequence_batch_tensors,
    video_disc_terms,
    video_gen_terms,
)
from .networks import (
    BaselineBundle,
    GeneratorConfig,
    ModelBundle,
    copy_matching_parameters,
    make_baseline_bundle,
    make_bundle,
)
from .validation import (
    CheckpointError,
    TrainingDivergedError,
    ValidationError,
    check_non_negative,
    check_positive,
)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 1
    lambda_fake: float = 0.1
    noise_std: float = 0.01
    iters: int = 1000
    seed: int = 0
    seq_len: int = 8

    def __post_init__(self):
        check_positive(self.lr, "lr")
        check_non_negative(self.lambda_fake, "lambda_fake")
        check_non_negative(self.noise_std, "noise_std")
        if self.batch_size < 1 or self.iters < 0 or self.seq_len < 1:
            raise ValidationError("batch_size/iters/seq_len out of range")

    def to_dict(self) -> dict:
        return {
            "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2,
            "batch_size": self.batch_size, "lambda_fake": self.lambda_fake,
            "noise_std": self.noise_std, "iters": self.iters,
            "seed": self.seed, "seq_len": self.seq_len,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class TrainState:
    bundle: ModelBundle | BaselineBundle
    opt_g: torch.optim.Adam
    opt_d: torch.optim.Adam
    train_config: TrainConfig
    np_rng: np.random.Generator
    torch_gen: torch.Generator
    objective: str = "ours"
    step: int = 0
    extractor: RandomConvFeatures | None = None


def new_train_state(
    gen_config: GeneratorConfig, train_config: TrainConfig, objective: str = "ours"
) -> TrainState:
    seed = train_config.seed
    if objective == "ours":
        bundle = make_bundle(gen_config, seed)
    else:
        bundle = make_baseline_bundle(gen_config, seed, objective)
    betas = (train_config.beta1, train_config.beta2)
    opt_g = torch.optim.Adam(bundle.generator_parameters(), lr=train_config.lr, betas=betas)
    opt_d = torch.optim.Adam(bundle.discriminator_parameters(), lr=train_config.lr, betas=betas)
    extractor = RandomConvFeatures(seed=seed) if objective == "perceptual" else None
    return TrainState(
        bundle=bundle,
        opt_g=opt_g,
        opt_d=opt_d,
        train_config=train_config,
        np_rng=np.random.default_rng(seed + 1),
        torch_gen=torch.Generator().manual_seed(seed + 2),
        objective=objective,
        extractor=extractor,
    )


def inject_history_noise(frames, noise_std: float, gen: torch.Generator):
    """Add clamped i.i.d. Gaussian pixel noise; ``noise_std=0`` is the identity."""
    check_non_negative(noise_std, "noise_std")
    if noise_std == 0.0:
        return frames
    single = isinstance(frames, torch.Tensor)
    items = [frames] if single else list(frames)
    out = [
        torch.clamp(f + noise_std * torch.randn(f.shape, generator=gen, dtype=f.dtype), 0.0, 1.0)
        for f in items
    ]
    return out[0] if single else out


def _check_finite(terms: dict, step: int) -> None:
    for name, (value, _) in terms.items():
        v = float(value.detach() if isinstance(value, torch.Tensor) else value)
        if not np.isfinite(v):
            raise TrainingDivergedError(name, step, v)


def _optimize(optimizer: torch.optim.Adam, terms: dict, step: int) -> LossReport:
    _check_finite(terms, step)
    total = sum(w * t for t, w in terms.values())
    optimizer.zero_grad(set_to_none=True)
    total.backward()
    optimizer.step()
    return LossReport.from_terms(terms)


def train_step_image(state: TrainState, batch, cfg: TrainConfig | None = None) -> dict:
    """One D update (all image-stage discriminators) then one G update."""
    cfg = cfg or state.train_config
    tens = image_batch_tensors(batch)
    bundle = state.bundle
    if state.objective == "ours":
        v, e = generator_forward_kinds(bundle, tens)
        d_report = _optimize(state.opt_d, image_disc_terms(bundle, tens, v, e, cfg.lambda_fake), state.step)
        g_report = _optimize(state.opt_g, image_gen_terms(bundle, tens, v, e, cfg.lambda_fake), state.step)
    else:
        outputs = baseline_forward(bundle, tens)
        d_report = _optimize(state.opt_d, baseline_disc_terms(bundle, tens, outputs), state.step)
        g_report = _optimize(
            state.opt_g, baseline_gen_terms(bundle, tens, outputs, state.extractor), state.step
        )
    state.step += 1
    bundle.step = state.step
    return {"state": state, "g_report": g_report, "d_report": d_report}


def train_step_video(state: TrainState, batch, cfg: TrainConfig | None = None) -> dict:
    """Noisy autoregressive rollout, then D and G updates as in the image stage."""
    from .losses import rollout_sequence

    cfg = cfg or state.train_config
    bundle = state.bundle
    if state.objective != "ours":
        raise ValidationError("video-stage training is defined for the method objective only")
    tens = sequence_batch_tensors(batch)
    seq_len = tens["x_real"].shape[0]
    need = bundle.config.history_len + bundle.config.clip_len
    if seq_len < need:
        raise ValidationError(f"sequence length {seq_len} < history + clip window = {need}")
    idx = draw_video_indices(state.np_rng, seq_len, bundle.config.clip_len)
    noise_fn = None
    if cfg.noise_std > 0 and bundle.config.history_len > 0:
        noise_fn = lambda f: inject_history_noise(f, cfg.noise_std, state.torch_gen)
    x = torch.stack([tens["x_fa"], tens["x_fb"], tens["x_real"]], dim=1)  # (T,3kinds,3,H,W)
    vv, ee = rollout_sequence(bundle, x, noise_fn)
    v = {"fake_a": vv[:, 0:1], "fake_b": vv[:, 1:2], "real": vv[:, 2:3]}
    e = {"fake_a": ee[:, 0:1], "fake_b": ee[:, 1:2], "real": ee[:, 2:3]}
    tens4 = dict(tens)
    tens4["u_b"] = tens["u_b"].unsqueeze(1)
    d_report = _optimize(state.opt_d, video_disc_terms(bundle, tens4, v, e, cfg.lambda_fake, idx), state.step)
    g_report = _optimize(state.opt_g, video_gen_terms(bundle, tens4, v, e, cfg.lambda_fake, idx), state.step)
    state.step += 1
    bundle.step = state.step
    return {"state": state, "g_report": g_report, "d_report": d_report}


# ---------------------------------------------------------------------------
# checkpointing


def _optimizer_payload(opt: torch.optim.Adam, prefix: str, arrays: dict, meta: dict) -> None:
    sd = opt.state_dict()
    meta[prefix] = {
        "param_groups": sd["param_groups"],
        "steps": {str(i): float(st["step"]) for i, st in sd["state"].items()},
    }
    for i, st in sd["state"].items():
        arrays[f"opt.{prefix}.{i}.exp_avg"] = st["exp_avg"].numpy()
        arrays[f"opt.{prefix}.{i}.exp_avg_sq"] = st["exp_avg_sq"].numpy()


def _load_optimizer(opt: torch.optim.Adam, prefix: str, arrays: dict, meta: dict) -> None:
    info = meta[prefix]
    state = {}
    for key, step_val in info["steps"].items():
        i = int(key)
        state[i] = {
            "step": torch.tensor(float(step_val)),
            "exp_avg": torch.from_numpy(arrays[f"opt.{prefix}.{i}.exp_avg"].copy()),
            "exp_avg_sq": torch.from_numpy(arrays[f"opt.{prefix}.{i}.exp_avg_sq"].copy()),
        }
    opt.load_state_dict({"state": state, "param_groups": info["param_groups"]})


def save_checkpoint(state: TrainState, path) -> None:
    arrays: dict[str, np.ndarray] = {}
    for mod_name, module in state.bundle.modules_by_name().items():
        for pname, p in module.named_parameters():
            arrays[f"param.{mod_name}.{pname}"] = p.detach().numpy()
    opt_meta: dict = {}
    _optimizer_payload(state.opt_g, "g", arrays, opt_meta)
    _optimizer_payload(state.opt_d, "d", arrays, opt_meta)
    arrays["rng.torch"] = state.torch_gen.get_state().numpy()
    header = {
        "kind": "train_state",
        "objective": state.objective,
        "step": state.step,
        "generator_config": state.bundle.config.to_dict(),
        "train_config": state.train_config.to_dict(),
        "np_rng": state.np_rng.bit_generator.state,
        "optimizers": opt_meta,
    }
    save_container(path, header, arrays)


def load_checkpoint(path, expect_generator_config: GeneratorConfig | None = None) -> TrainState:
    header, arrays = load_container(path)
    if header.get("kind") != "train_state":
        raise CheckpointError(f"{path}: unexpected checkpoint kind {header.get('kind')!r}")
    gen_config = GeneratorConfig.from_dict(header["generator_config"])
    if expect_generator_config is not None and gen_config != expect_generator_config:
        raise CheckpointError(
            f"{path}: checkpoint config {gen_config} does not match expected "
            f"{expect_generator_config}"
        )
    train_config = TrainConfig.from_dict(header["train_config"])
    state = new_train_state(gen_config, train_config, header["objective"])
    with torch.no_grad():
        for mod_name, module in state.bundle.modules_by_name().items():
            for pname, p in module.named_parameters():
                key = f"param.{mod_name}.{pname}"
                if key not in arrays:
                    raise CheckpointError(f"{path}: missing parameter array {key!r}")
                p.copy_(torch.from_numpy(arrays[key].copy()))
    _load_optimizer(state.opt_g, "g", arrays, header["optimizers"])
    _load_optimizer(state.opt_d, "d", arrays, header["optimizers"])
    rng = np.random.default_rng()
    rng.bit_generator.state = header["np_rng"]
    state.np_rng = rng
    state.torch_gen.set_state(torch.from_numpy(arrays["rng.torch"].copy()))
    state.step = header["step"]
    state.bundle.step = state.step
    return state


# ---------------------------------------------------------------------------
# fit loops over dataset pools


class TrainLogger:
    """Line-oriented JSON training log: one record per step."""

    def __init__(self, path=None):
        self.path = Path(path) if path else None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "w", encoding="utf-8")
        else:
            self._fh = None

    def log(self, step: int, g: LossReport, d: LossReport) -> None:
        if self._fh is None:
            return
        record = {"step": step, "g": g.components, "g_total": g.total,
                  "d": d.components, "d_total": d.total}
        self._fh.write(json.dumps(record, sort_keys=True) + "\n")

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def _pick_pair(rng: np.random.Generator, pool_a, pool_b) -> tuple[ClipDataset, ClipDataset]:
    ia = int(rng.integers(len(pool_a)))
    ib = int(rng.integers(len(pool_b)))
    if pool_a is pool_b and len(pool_b) > 1 and ib == ia:
        ib = (ib + 1 + int(rng.integers(len(pool_b) - 1))) % len(pool_b)
    return pool_a[ia], pool_b[ib]


def fit_image_stage(
    pool_a: list[ClipDataset],
    pool_b: list[ClipDataset],
    gen_config: GeneratorConfig,
    train_config: TrainConfig,
    objective: str = "ours",
    log_path=None,
    state: TrainState | None = None,
) -> TrainState:
    """Train the image-stage model (method or baseline) on two video pools."""
    if gen_config.history_len != 0:
        raise ValidationError("image stage requires history_len == 0")
    if not pool_a or not pool_b:
        raise ValidationError("both dataset pools must be non-empty")
    state = state or new_train_state(gen_config, train_config, objective)
    mask = make_mask(gen_config.patch, gen_config.mask_frac_w, gen_config.mask_frac_h)
    logger = TrainLogger(log_path)
    try:
        for _ in range(train_config.iters):
            batches = []
            for _ in range(train_config.batch_size):
                ds_a, ds_b = _pick_pair(state.np_rng, pool_a, pool_b)
                seed = int(state.np_rng.integers(2**63))
                batches.append(
                    make_training_batch(ds_a, ds_b, None, seed, gen_config.patch, mask,
                                        margin=gen_config.crop_margin)
                )
            out = train_step_image(state, batches)
            logger.log(state.step, out["g_report"], out["d_report"])
    finally:
        logger.close()
    return state


def fit_video_stage(
    pool_a: list[ClipDataset],
    pool_b: list[ClipDataset],
    gen_config: GeneratorConfig,
    train_config: TrainConfig,
    init_from: TrainState | None = None,
    log_path=None,
    state: TrainState | None = None,
) -> TrainState:
    """Train the video-stage model, optionally warm-starting shared layers
    from a trained image-stage state (history-path channels stay fresh)."""
    if gen_config.history_len <= 0:
        raise ValidationError("video stage requires history_len > 0")
    if train_config.seq_len < gen_config.history_len + gen_config.clip_len:
        raise ValidationError("seq_len must cover history_len + clip_len")
    if not pool_a or not pool_b:
        raise ValidationError("both dataset pools must be non-empty")
    state = state or new_train_state(gen_config, train_config, "ours")
    if init_from is not None:
        src = init_from.bundle.modules_by_name()
        dst = state.bundle.modules_by_name()
        for name in ("g", "di", "de"):
            if name in src and name in dst:
                copy_matching_parameters(src[name], dst[name])
    mask = make_mask(gen_config.patch, gen_config.mask_frac_w, gen_config.mask_frac_h)
    logger = TrainLogger(log_path)
    try:
        for _ in range(train_config.iters):
            ds_a, ds_b = _pick_pair(state.np_rng, pool_a, pool_b)
            seed = int(state.np_rng.integers(2**63))
            batch = make_sequence_batch(
                ds_a, ds_b, None, train_config.seq_len, seed, gen_config.patch, mask,
                margin=gen_config.crop_margin,
            )
            out = train_step_video(state, batch)
            logger.log(state.step, out["g_report"], out["d_report"])
    finally:
        logger.close()
    return state
