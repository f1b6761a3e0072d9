"""Method and baseline objectives as composable scalar loss terms.

Every objective is reported as a :class:`LossReport`: raw per-term component
values plus the weight each term carries in the total. Terms that arise from
the two fake pairs are weighted by ``lambda_fake``; real-pair terms keep
weight 1. Generators use the non-saturating `-log D` form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .blending import TrainingBatch
from .networks import BaselineBundle, ModelBundle, tile_embedding, to_chw
from .validation import ValidationError, check_non_negative

BASELINE_KINDS = ("adv_only", "pixel", "perceptual", "cycle")

_ROLES = ("discriminator", "generator")


@dataclass(frozen=True)
class LossReport:
    """Scalar total with its named components and their weights."""

    total: float
    components: dict[str, float]
    weights: dict[str, float]

    @classmethod
    def from_terms(cls, terms: dict[str, tuple]) -> "LossReport":
        components = {
            k: float(v.detach() if isinstance(v, torch.Tensor) else v)
            for k, (v, _) in terms.items()
        }
        weights = {k: float(w) for k, (_, w) in terms.items()}
        total = sum(weights[k] * components[k] for k in components)
        return cls(total=total, components=components, weights=weights)

    def weighted_sum(self) -> float:
        return sum(self.weights[k] * self.components[k] for k in self.components)

    def family(self, prefix: str) -> float:
        """Sum of raw component values whose name starts with ``prefix``."""
        return sum(v for k, v in self.components.items() if k.startswith(prefix))


def _as_scalar(value, like):
    return float(value) if isinstance(like, (int, float)) else value


def adversarial_term(score, target_is_real: bool, role: str):
    """One adversarial log term on a classifier score in (0, 1).

    Discriminator role: -log(score) for real targets, -log(1 - score) for
    generated ones. Generator role: non-saturating -log(score) on generated
    samples.
    """
    if role not in _ROLES:
        raise ValidationError(f"role must be one of {_ROLES}, got {role!r}")
    s = torch.as_tensor(score)
    if not bool(((s > 0) & (s < 1)).all()):
        raise ValidationError(f"scores must lie strictly inside (0, 1), got {score!r}")
    if role == "discriminator" and not target_is_real:
        out = -torch.log(1.0 - s)
    else:
        out = -torch.log(s)
    return _as_scalar(out.mean(), score)


def reconstruction_loss(output, target):
    """Mean absolute per-pixel difference (L1)."""
    if tuple(output.shape) != tuple(target.shape):
        raise ValidationError(
            f"shape mismatch: output {tuple(output.shape)} vs target {tuple(target.shape)}"
        )
    diff = abs(output - target)
    return diff.mean() if isinstance(diff, torch.Tensor) else float(np.mean(diff))


def embedding_adversarial(e_scores, role: str, lambda_fake: float = 1.0):
    """Embedding-space adversarial loss over the three pair kinds.

    The embedding discriminator labels fake pairs 1 and the real pair 0;
    the encoder's generator-side term flips only the real-pair label.
    """
    if role not in _ROLES:
        raise ValidationError(f"role must be one of {_ROLES}, got {role!r}")
    scores = dict(e_scores)
    missing = {"fake_a", "fake_b", "real"} - set(scores)
    if missing:
        raise ValidationError(f"missing embedding scores for {sorted(missing)}")
    if role == "generator":
        return adversarial_term(scores["real"], True, "generator")
    d_fake = adversarial_term(scores["fake_a"], True, "discriminator")
    d_fake2 = adversarial_term(scores["fake_b"], True, "discriminator")
    d_real = adversarial_term(scores["real"], False, "discriminator")
    return lambda_fake * (d_fake + d_fake2) + d_real


# ---------------------------------------------------------------------------
# perceptual distance


class RandomConvFeatures(nn.Module):
    """Fixed randomly initialized conv stack used as a feature extractor.

    A valid (deterministic, weight-free-to-train) stand-in for pretrained
    deep features; anything exposing ``forward(x) -> list[feature maps]``
    can be plugged in instead.
    """

    def __init__(self, channels: tuple[int, ...] = (16, 32), seed: int = 0):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        convs = []
        in_ch = 3
        for i, c in enumerate(channels):
            conv = nn.Conv2d(in_ch, c, 3, stride=1 if i == 0 else 2, padding=1)
            with torch.no_grad():
                conv.weight.copy_(torch.randn(conv.weight.shape, generator=gen) * 0.2)
                conv.bias.zero_()
            convs.append(conv)
            in_ch = c
        self.convs = nn.ModuleList(convs)
        for p in self.parameters():
            p.requires_grad_(False)

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        feats = []
        for conv in self.convs:
            x = torch.tanh(conv(x))
            feats.append(x)
        return feats


class IdentityFeatures(nn.Module):
    """Single-layer extractor returning the input itself."""

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        return [x]


def perceptual_distance(a, b, extractor):
    """Sum over extractor layers of mean squared feature difference.

    Each layer contributes ||phi_l(a) - phi_l(b)||^2 / (C_l * H_l * W_l).
    Accepts HxWx3 arrays or (B,3,H,W) tensors.
    """
    if tuple(a.shape) != tuple(b.shape):
        raise ValidationError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    was_numpy = isinstance(a, np.ndarray)
    ta = to_chw(a).unsqueeze(0) if was_numpy else a
    tb = to_chw(b).unsqueeze(0) if was_numpy else b
    if ta.dim() == 3:
        ta, tb = ta.unsqueeze(0), tb.unsqueeze(0)
    fa, fb = extractor(ta), extractor(tb)
    if len(fa) == 0:
        raise ValidationError("extractor must expose at least one layer")
    total = 0.0
    for la, lb in zip(fa, fb):
        if la.shape != lb.shape:
            raise ValidationError("extractor produced mismatched layer shapes")
        n = la.shape[1] * la.shape[2] * la.shape[3]
        total = total + ((la - lb) ** 2).sum(dim=(1, 2, 3)).mean() / n
    return float(total) if was_numpy else total


# ---------------------------------------------------------------------------
# tensor plumbing


def masked(x: torch.Tensor, m: torch.Tensor) -> torch.Tensor:
    """Multiply (B,3,H,W) images by an HxW mask."""
    return x * m.view(1, 1, *m.shape)


def blend_tensors(u: torch.Tensor, r: torch.Tensor, m: torch.Tensor) -> torch.Tensor:
    """Differentiable version of the blending operator on (B,3,H,W) tensors."""
    half = (m / 2.0).view(1, 1, *m.shape)
    return u * half + r * (1.0 - half)


def image_batch_tensors(batches) -> dict[str, torch.Tensor]:
    """Stack one or more image TrainingBatches into (B,3,H,W) tensors."""
    if isinstance(batches, TrainingBatch):
        batches = [batches]
    if any(b.is_sequence for b in batches):
        raise ValidationError("expected image batches, got sequences")
    out = {}
    for key in ("u_a", "u_b", "r_a", "r_b"):
        out[key] = torch.stack([to_chw(getattr(b, key)) for b in batches])
    out["x_real"] = torch.stack([to_chw(b.real.input) for b in batches])
    out["x_fa"] = torch.stack([to_chw(b.fake_a.input) for b in batches])
    out["x_fb"] = torch.stack([to_chw(b.fake_b.input) for b in batches])
    out["mask"] = torch.from_numpy(batches[0].mask.values).float()
    return out


def sequence_batch_tensors(batch: TrainingBatch) -> dict[str, torch.Tensor]:
    """Convert a sequence batch into (T,3,H,W) tensors per payload."""
    if not batch.is_sequence:
        raise ValidationError("expected a sequence batch")
    to_seq = lambda arr: torch.stack([to_chw(a) for a in arr])
    return {
        "u_a": to_seq(batch.u_a),
        "u_b": to_seq(batch.u_b),
        "r_a": to_seq(batch.r_a),
        "r_b": to_seq(batch.r_b),
        "x_real": to_seq(batch.real.input),
        "x_fa": to_seq(batch.fake_a.input),
        "x_fb": to_seq(batch.fake_b.input),
        "mask": torch.from_numpy(batch.mask.values).float(),
    }


def _mean_log_term(scores: torch.Tensor, target_is_real: bool, role: str) -> torch.Tensor:
    return adversarial_term(scores, target_is_real, role)


# ---------------------------------------------------------------------------
# method objective, image stage


def generator_forward_kinds(bundle, tens) -> tuple[dict, dict]:
    """Run the generator on the three pair kinds in one stacked forward."""
    b = tens["x_fa"].shape[0]
    x = torch.cat([tens["x_fa"], tens["x_fb"], tens["x_real"]], dim=0)
    v, e = bundle.generator(x)
    split = lambda t: {"fake_a": t[:b], "fake_b": t[b : 2 * b], "real": t[2 * b :]}
    return split(v), split(e)


def image_disc_terms(bundle: ModelBundle, tens, v, e, lambda_fake: float) -> dict:
    """Discriminator-side terms of the image objective (detached inputs)."""
    lam = lambda_fake
    h, w = tens["u_b"].shape[-2:]
    v = {k: t.detach() for k, t in v.items()}
    e = {k: t.detach() for k, t in e.items()}
    cond = {k: tile_embedding(t, h, w) for k, t in e.items()}
    images = torch.cat([tens["u_b"], tens["u_b"], v["fake_a"], v["fake_b"], v["real"]])
    conds = torch.cat([cond["fake_a"], cond["fake_b"], cond["fake_a"], cond["fake_b"], cond["real"]])
    s = bundle.image_disc(images, conds)
    b = tens["u_b"].shape[0]
    chunk = lambda i: s[i * b : (i + 1) * b]
    se = {k: bundle.embed_disc(t) for k, t in e.items()}
    return {
        "adv_DI_data_fakeA": (_mean_log_term(chunk(0), True, "discriminator"), lam),
        "adv_DI_data_fakeB": (_mean_log_term(chunk(1), True, "discriminator"), lam),
        "adv_DI_gen_fakeA": (_mean_log_term(chunk(2), False, "discriminator"), lam),
        "adv_DI_gen_fakeB": (_mean_log_term(chunk(3), False, "discriminator"), lam),
        "adv_DI_gen_real": (_mean_log_term(chunk(4), False, "discriminator"), 1.0),
        "adv_DE_fakeA": (_mean_log_term(se["fake_a"], True, "discriminator"), lam),
        "adv_DE_fakeB": (_mean_log_term(se["fake_b"], True, "discriminator"), lam),
        "adv_DE_real": (_mean_log_term(se["real"], False, "discriminator"), 1.0),
    }


def image_gen_terms(bundle: ModelBundle, tens, v, e, lambda_fake: float) -> dict:
    """Generator-side terms: non-saturating adversarial plus reconstruction."""
    lam = lambda_fake
    h, w = tens["u_b"].shape[-2:]
    cond = {k: tile_embedding(t, h, w) for k, t in e.items()}
    images = torch.cat([v["fake_a"], v["fake_b"], v["real"]])
    conds = torch.cat([cond["fake_a"], cond["fake_b"], cond["real"]])
    s = bundle.image_disc(images, conds)
    b = tens["u_b"].shape[0]
    return {
        "adv_DI_fakeA": (_mean_log_term(s[:b], True, "generator"), lam),
        "adv_DI_fakeB": (_mean_log_term(s[b : 2 * b], True, "generator"), lam),
        "adv_DI_real": (_mean_log_term(s[2 * b :], True, "generator"), 1.0),
        "adv_DE_real": (_mean_log_term(bundle.embed_disc(e["real"]), True, "generator"), 1.0),
        "recon_fakeA": (reconstruction_loss(v["fake_a"], tens["u_b"]), lam),
        "recon_fakeB": (reconstruction_loss(v["fake_b"], tens["u_b"]), lam),
    }


def image_objective(bundle: ModelBundle, batch: TrainingBatch, lambda_fake: float) -> dict:
    """Evaluate generator- and discriminator-side reports without updating."""
    check_non_negative(lambda_fake, "lambda_fake")
    tens = image_batch_tensors(batch)
    with torch.no_grad():
        v, e = generator_forward_kinds(bundle, tens)
        d_terms = image_disc_terms(bundle, tens, v, e, lambda_fake)
        g_terms = image_gen_terms(bundle, tens, v, e, lambda_fake)
    return {"g_loss": LossReport.from_terms(g_terms), "d_losses": LossReport.from_terms(d_terms)}


# ---------------------------------------------------------------------------
# method objective, video stage


def bootstrap_history(bundle, x0: torch.Tensor, noise_fn=None) -> list[torch.Tensor]:
    """History for t=0: the first blended input passed through the generator once."""
    n = bundle.config.history_len
    seed = [x0] * n
    if noise_fn is not None:
        seed = [noise_fn(h) for h in seed]
    with torch.no_grad():
        boot, _ = bundle.generator(x0, seed)
    return [boot] * n


def rollout_sequence(bundle, inputs: torch.Tensor, noise_fn=None) -> tuple[torch.Tensor, torch.Tensor]:
    """Autoregressive rollout over (T,B,3,H,W) inputs.

    The generator's own outputs form the history (detached between frames);
    ``noise_fn`` is applied to every history frame before it is consumed.
    Returns stacked outputs (T,B,3,H,W) and embeddings (T,B,E).
    """
    n = bundle.config.history_len
    outs, embs = [], []
    hist = bootstrap_history(bundle, inputs[0], noise_fn) if n > 0 else []
    for t in range(inputs.shape[0]):
        feed = [noise_fn(h) for h in hist] if (noise_fn is not None and n > 0) else list(hist)
        v, e = bundle.generator(inputs[t], feed)
        outs.append(v)
        embs.append(e)
        if n > 0:
            hist = (hist + [v.detach()])[-n:]
    return torch.stack(outs), torch.stack(embs)


def draw_video_indices(rng: np.random.Generator, seq_len: int, window: int) -> dict:
    """Random frame per pair kind plus one window start, in a fixed order."""
    if seq_len < window:
        raise ValidationError(f"sequence length {seq_len} shorter than clip window {window}")
    return {
        "t_fa": int(rng.integers(seq_len)),
        "t_fb": int(rng.integers(seq_len)),
        "t_real": int(rng.integers(seq_len)),
        "win": int(rng.integers(seq_len - window + 1)),
    }


def _clip_cond(e: torch.Tensor, h: int, w: int) -> torch.Tensor:
    """Per-frame embeddings (T,B,E) -> clip conditioning (B,E,T,H,W)."""
    t, b, dim = e.shape
    return e.permute(1, 2, 0).reshape(b, dim, t, 1, 1).expand(b, dim, t, h, w)


def video_disc_terms(bundle: ModelBundle, tens, v, e, lambda_fake: float, idx: dict) -> dict:
    lam = lambda_fake
    h, w = tens["u_b"].shape[-2:]
    win = bundle.config.clip_len
    v = {k: t.detach() for k, t in v.items()}
    e = {k: t.detach() for k, t in e.items()}

    # per-kind random single frame for the image discriminator
    frame = {"fake_a": idx["t_fa"], "fake_b": idx["t_fb"], "real": idx["t_real"]}
    cond = {k: tile_embedding(e[k][frame[k]], h, w) for k in e}
    images = torch.cat(
        [tens["u_b"][frame["fake_a"]], tens["u_b"][frame["fake_b"]]]
        + [v[k][frame[k]] for k in ("fake_a", "fake_b", "real")]
    )
    conds = torch.cat([cond["fake_a"], cond["fake_b"], cond["fake_a"], cond["fake_b"], cond["real"]])
    si = bundle.image_disc(images, conds)

    s0 = idx["win"]
    to_clip = lambda seq: seq[s0 : s0 + win].permute(1, 2, 0, 3, 4)
    cc = {k: _clip_cond(e[k][s0 : s0 + win], h, w) for k in e}
    clips = torch.cat(
        [to_clip(tens["u_b"]), to_clip(tens["u_b"])]
        + [to_clip(v[k]) for k in ("fake_a", "fake_b", "real")]
    )
    conds_v = torch.cat([cc["fake_a"], cc["fake_b"], cc["fake_a"], cc["fake_b"], cc["real"]])
    sv = bundle.clip_disc(clips, conds_v)

    se = {k: bundle.embed_disc(e[k].reshape(-1, e[k].shape[-1])) for k in e}
    return {
        "adv_DI_data_fakeA": (_mean_log_term(si[0], True, "discriminator"), lam),
        "adv_DI_data_fakeB": (_mean_log_term(si[1], True, "discriminator"), lam),
        "adv_DI_gen_fakeA": (_mean_log_term(si[2], False, "discriminator"), lam),
        "adv_DI_gen_fakeB": (_mean_log_term(si[3], False, "discriminator"), lam),
        "adv_DI_gen_real": (_mean_log_term(si[4], False, "discriminator"), 1.0),
        "adv_DV_data_fakeA": (_mean_log_term(sv[0], True, "discriminator"), lam),
        "adv_DV_data_fakeB": (_mean_log_term(sv[1], True, "discriminator"), lam),
        "adv_DV_gen_fakeA": (_mean_log_term(sv[2], False, "discriminator"), lam),
        "adv_DV_gen_fakeB": (_mean_log_term(sv[3], False, "discriminator"), lam),
        "adv_DV_gen_real": (_mean_log_term(sv[4], False, "discriminator"), 1.0),
        "adv_DE_fakeA": (_mean_log_term(se["fake_a"], True, "discriminator"), lam),
        "adv_DE_fakeB": (_mean_log_term(se["fake_b"], True, "discriminator"), lam),
        "adv_DE_real": (_mean_log_term(se["real"], False, "discriminator"), 1.0),
    }


def video_gen_terms(bundle: ModelBundle, tens, v, e, lambda_fake: float, idx: dict) -> dict:
    lam = lambda_fake
    h, w = tens["u_b"].shape[-2:]
    win = bundle.config.clip_len
    frame = {"fake_a": idx["t_fa"], "fake_b": idx["t_fb"], "real": idx["t_real"]}
    cond = {k: tile_embedding(e[k][frame[k]], h, w) for k in e}
    images = torch.cat([v[k][frame[k]] for k in ("fake_a", "fake_b", "real")])
    conds = torch.cat([cond["fake_a"], cond["fake_b"], cond["real"]])
    si = bundle.image_disc(images, conds)

    s0 = idx["win"]
    to_clip = lambda seq: seq[s0 : s0 + win].permute(1, 2, 0, 3, 4)
    cc = {k: _clip_cond(e[k][s0 : s0 + win], h, w) for k in e}
    clips = torch.cat([to_clip(v[k]) for k in ("fake_a", "fake_b", "real")])
    sv = bundle.clip_disc(clips, torch.cat([cc["fake_a"], cc["fake_b"], cc["real"]]))

    se_real = bundle.embed_disc(e["real"].reshape(-1, e["real"].shape[-1]))
    return {
        "adv_DI_fakeA": (_mean_log_term(si[0], True, "generator"), lam),
        "adv_DI_fakeB": (_mean_log_term(si[1], True, "generator"), lam),
        "adv_DI_real": (_mean_log_term(si[2], True, "generator"), 1.0),
        "adv_DV_fakeA": (_mean_log_term(sv[0], True, "generator"), lam),
        "adv_DV_fakeB": (_mean_log_term(sv[1], True, "generator"), lam),
        "adv_DV_real": (_mean_log_term(sv[2], True, "generator"), 1.0),
        "adv_DE_real": (_mean_log_term(se_real, True, "generator"), 1.0),
        "recon_fakeA": (reconstruction_loss(v["fake_a"], tens["u_b"]), lam),
        "recon_fakeB": (reconstruction_loss(v["fake_b"], tens["u_b"]), lam),
    }


def video_objective(
    bundle: ModelBundle, batch: TrainingBatch, lambda_fake: float, rng: np.random.Generator
) -> dict:
    """Evaluate the video-stage objective on a sequence batch (no updates).

    The rollout is noise-free here; noise injection is a training concern.
    """
    check_non_negative(lambda_fake, "lambda_fake")
    tens = sequence_batch_tensors(batch)
    seq_len = tens["x_real"].shape[0]
    idx = draw_video_indices(rng, seq_len, bundle.config.clip_len)
    with torch.no_grad():
        x = torch.stack([tens["x_fa"], tens["x_fb"], tens["x_real"]], dim=1)  # (T,3,3,H,W)
        vv, ee = rollout_sequence(bundle, x)
        v = {"fake_a": vv[:, 0:1], "fake_b": vv[:, 1:2], "real": vv[:, 2:3]}
        e = {"fake_a": ee[:, 0:1], "fake_b": ee[:, 1:2], "real": ee[:, 2:3]}
        tens4 = dict(tens)
        tens4["u_b"] = tens["u_b"].unsqueeze(1)
        d_terms = video_disc_terms(bundle, tens4, v, e, lambda_fake, idx)
        g_terms = video_gen_terms(bundle, tens4, v, e, lambda_fake, idx)
    return {"g_loss": LossReport.from_terms(g_terms), "d_losses": LossReport.from_terms(d_terms)}


# ---------------------------------------------------------------------------
# baseline objectives


def cycle_content_terms(u_a, r_a, u_b, r_b, mask, g_fn, f_fn) -> dict:
    """The four masked content terms of the cycle-consistency objective.

    ``g_fn``/``f_fn`` map a blended (B,3,H,W) input to an output; outputs and
    the cross-mapped reconstructions are compared with mean L1.
    """
    inv = 1.0 - mask
    v_a = g_fn(blend_tensors(u_a, r_b, mask))
    v_b = f_fn(blend_tensors(u_b, r_a, mask))
    cyc_a = reconstruction_loss(f_fn(blend_tensors(v_a, masked(u_a, inv), mask)), u_a)
    cyc_b = reconstruction_loss(g_fn(blend_tensors(v_b, masked(u_b, inv), mask)), u_b)
    bg_a = reconstruction_loss(masked(v_a, inv), masked(r_b, inv))
    bg_b = reconstruction_loss(masked(v_b, inv), masked(r_a, inv))
    return {
        "cycle_a": cyc_a,
        "cycle_b": cyc_b,
        "cycle_bg_a": bg_a,
        "cycle_bg_b": bg_b,
        "v_a": v_a,
        "v_b": v_b,
    }


def baseline_disc_terms(bundle: BaselineBundle, tens, outputs: dict) -> dict:
    if bundle.kind == "cycle":
        sb = bundle.disc(torch.cat([tens["u_b"], outputs["v_a"].detach()]))
        sa = bundle.disc_back(torch.cat([tens["u_a"], outputs["v_b"].detach()]))
        b = tens["u_b"].shape[0]
        return {
            "adv_DB_data": (_mean_log_term(sb[:b], True, "discriminator"), 1.0),
            "adv_DB_gen": (_mean_log_term(sb[b:], False, "discriminator"), 1.0),
            "adv_DA_data": (_mean_log_term(sa[:b], True, "discriminator"), 1.0),
            "adv_DA_gen": (_mean_log_term(sa[b:], False, "discriminator"), 1.0),
        }
    s = bundle.disc(torch.cat([tens["u_b"], outputs["v_a"].detach()]))
    b = tens["u_b"].shape[0]
    return {
        "adv_D_data": (_mean_log_term(s[:b], True, "discriminator"), 1.0),
        "adv_D_gen": (_mean_log_term(s[b:], False, "discriminator"), 1.0),
    }


def baseline_gen_terms(bundle: BaselineBundle, tens, outputs: dict, extractor=None) -> dict:
    mask = tens["mask"]
    v_a = outputs["v_a"]
    if bundle.kind == "cycle":
        terms = {
            "adv_DB": (_mean_log_term(bundle.disc(v_a), True, "generator"), 1.0),
            "adv_DA": (_mean_log_term(bundle.disc_back(outputs["v_b"]), True, "generator"), 1.0),
        }
        for key in ("cycle_a", "cycle_b", "cycle_bg_a", "cycle_bg_b"):
            terms[key] = (outputs[key], 1.0)
        return terms
    terms = {"adv_D": (_mean_log_term(bundle.disc(v_a), True, "generator"), 1.0)}
    if bundle.kind == "pixel":
        terms["pixel"] = (reconstruction_loss(masked(v_a, mask), masked(tens["u_a"], mask)), 1.0)
    elif bundle.kind == "perceptual":
        if extractor is None:
            raise ValidationError("perceptual baseline needs a feature extractor")
        terms["perceptual"] = (
            perceptual_distance(masked(tens["u_a"], mask), masked(v_a, mask), extractor),
            1.0,
        )
    return terms


def baseline_forward(bundle: BaselineBundle, tens) -> dict:
    """Outputs every baseline term needs; cycle adds the back mapping."""
    if bundle.kind == "cycle":
        out = cycle_content_terms(
            tens["u_a"], tens["r_a"], tens["u_b"], tens["r_b"], tens["mask"],
            lambda x: bundle.generator(x)[0],
            lambda x: bundle.generator_back(x)[0],
        )
        return out
    v_a, _ = bundle.generator(tens["x_real"])
    return {"v_a": v_a}


def baseline_objective(
    kind: str,
    bundle: BaselineBundle,
    batch: TrainingBatch,
    extractor=None,
) -> dict:
    """Evaluate one of the four baseline objectives (no updates)."""
    if kind not in BASELINE_KINDS:
        raise ValidationError(f"unknown baseline kind {kind!r}; choose from {BASELINE_KINDS}")
    if kind != bundle.kind:
        raise ValidationError(f"bundle was built for {bundle.kind!r}, not {kind!r}")
    if kind == "cycle" and (bundle.generator_back is None or bundle.disc_back is None):
        raise ValidationError("cycle baseline requires the auxiliary generator/discriminator")
    tens = image_batch_tensors(batch)
    with torch.no_grad():
        outputs = baseline_forward(bundle, tens)
        d_terms = baseline_disc_terms(bundle, tens, outputs)
        g_terms = baseline_gen_terms(bundle, tens, outputs, extractor)
    return {"g_loss": LossReport.from_terms(g_terms), "d_losses": LossReport.from_terms(d_terms)}


UNINFORMATIVE_SCORE_TERM = -math.log(0.5)
