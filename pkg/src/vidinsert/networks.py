"""Generator and discriminator networks plus the parameter bundle.

The generator is a U-net style encoder-decoder with stride-2 4x4
convolutions, instance normalization, and a sigmoid output. With a nonzero
history length, previous output frames are encoded by the *same* encoder,
their per-level feature maps are linearly combined with fixed scalar
weights, and the result is concatenated channel-wise with the current-path
features feeding the decoder. With history length 0 the network is exactly
the image generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .datasets import PatchSpec
from .validation import ValidationError

# scores are clamped strictly inside (0, 1) so log terms stay finite
SCORE_EPS = 1e-6


@dataclass(frozen=True)
class GeneratorConfig:
    base_filters: int = 64
    n_levels: int = 4
    patch: PatchSpec = field(default_factory=PatchSpec)
    history_len: int = 2
    history_weights: tuple[float, ...] = (0.5, 0.5)
    clip_len: int = 6          # frames the video discriminator sees
    mask_frac_w: float = 0.5   # blend-mask geometry the model was trained for
    mask_frac_h: float = 0.75
    crop_margin: float = 0.1

    def __post_init__(self):
        if self.base_filters < 8:
            raise ValidationError("base_filters must be >= 8")
        if self.n_levels < 2:
            raise ValidationError("n_levels must be >= 2")
        if self.history_len < 0:
            raise ValidationError("history_len must be >= 0")
        if len(self.history_weights) != self.history_len:
            raise ValidationError("history_weights length must equal history_len")
        if any(w < 0 for w in self.history_weights):
            raise ValidationError("history weights must be non-negative")
        div = 2 ** self.n_levels
        if self.patch.height % div or self.patch.width % div:
            raise ValidationError(
                f"patch {self.patch.shape} must be divisible by 2^n_levels = {div}"
            )
        if self.clip_len < 2:
            raise ValidationError("clip_len must be >= 2")

    @property
    def channels(self) -> tuple[int, ...]:
        return tuple(self.base_filters * 2**i for i in range(self.n_levels))

    @property
    def embed_dim(self) -> int:
        return self.channels[-1]

    def to_dict(self) -> dict:
        return {
            "base_filters": self.base_filters,
            "n_levels": self.n_levels,
            "patch_height": self.patch.height,
            "patch_width": self.patch.width,
            "history_len": self.history_len,
            "history_weights": list(self.history_weights),
            "clip_len": self.clip_len,
            "mask_frac_w": self.mask_frac_w,
            "mask_frac_h": self.mask_frac_h,
            "crop_margin": self.crop_margin,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        return cls(
            base_filters=d["base_filters"],
            n_levels=d["n_levels"],
            patch=PatchSpec(d["patch_height"], d["patch_width"]),
            history_len=d["history_len"],
            history_weights=tuple(d["history_weights"]),
            clip_len=d["clip_len"],
            mask_frac_w=d["mask_frac_w"],
            mask_frac_h=d["mask_frac_h"],
            crop_margin=d["crop_margin"],
        )


def combine_history_features(features, weights) -> torch.Tensor:
    """Weighted sum of equally shaped feature maps: sum_n w[n] * features[n]."""
    if len(features) == 0 or len(features) != len(weights):
        raise ValidationError(
            f"need len(features) == len(weights) >= 1, got {len(features)} vs {len(weights)}"
        )
    shape = features[0].shape
    if any(f.shape != shape for f in features):
        raise ValidationError("history feature maps disagree on shape")
    out = features[0] * weights[0]
    for f, w in zip(features[1:], weights[1:]):
        out = out + f * w
    return out


def tile_embedding(e: torch.Tensor, h: int, w: int) -> torch.Tensor:
    """Copy an embedding vector to every spatial location of an h x w grid."""
    if h < 1 or w < 1:
        raise ValidationError("tile size must be >= 1")
    if e.dim() == 1:
        return e.view(-1, 1, 1).expand(e.shape[0], h, w)
    if e.dim() == 2:
        b, dim = e.shape
        return e.view(b, dim, 1, 1).expand(b, dim, h, w)
    raise ValidationError(f"embedding must be (E,) or (B, E), got shape {tuple(e.shape)}")


class Generator(nn.Module):
    """Encoder-decoder with skip connections and optional history fusion."""

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        ch = config.channels
        k = 2 if config.history_len > 0 else 1
        self.enc = nn.ModuleList()
        self.enc_norm = nn.ModuleList()
        in_ch = 3
        for lvl, c in enumerate(ch):
            self.enc.append(nn.Conv2d(in_ch, c, 4, 2, 1))
            self.enc_norm.append(
                nn.InstanceNorm2d(c, affine=True) if lvl > 0 else nn.Identity()
            )
            in_ch = c
        self.dec = nn.ModuleList()
        self.dec_norm = nn.ModuleList()
        for lvl in range(config.n_levels - 1, -1, -1):
            top = lvl == config.n_levels - 1
            in_c = ch[lvl] * k + (0 if top else ch[lvl])
            out_c = 3 if lvl == 0 else ch[lvl - 1]
            self.dec.append(nn.ConvTranspose2d(in_c, out_c, 4, 2, 1))
            self.dec_norm.append(
                nn.InstanceNorm2d(out_c, affine=True) if lvl > 0 else nn.Identity()
            )

    def encode(self, x: torch.Tensor) -> list[torch.Tensor]:
        feats = []
        for conv, norm in zip(self.enc, self.enc_norm):
            x = F.leaky_relu(norm(conv(x)), 0.2)
            feats.append(x)
        return feats

    def forward(self, x: torch.Tensor, history=()) -> tuple[torch.Tensor, torch.Tensor]:
        """Map a blended input (B,3,H,W) to (output, bottleneck embedding)."""
        cfg = self.config
        if x.dim() != 4 or x.shape[1] != 3:
            raise ValidationError(f"generator input must be (B,3,H,W), got {tuple(x.shape)}")
        if x.shape[2:] != (cfg.patch.height, cfg.patch.width):
            raise ValidationError(
                f"input size {tuple(x.shape[2:])} does not match patch {cfg.patch.shape}"
            )
        if len(history) != cfg.history_len:
            raise ValidationError(
                f"expected {cfg.history_len} history frames, got {len(history)}"
            )
        feats = self.encode(x)
        embedding = feats[-1].mean(dim=(2, 3))
        if cfg.history_len > 0:
            per_frame = [self.encode(h) for h in history]
            hist = [
                combine_history_features([pf[l] for pf in per_frame], cfg.history_weights)
                for l in range(cfg.n_levels)
            ]
        else:
            hist = None
        out = None
        for i, (deconv, norm) in enumerate(zip(self.dec, self.dec_norm)):
            lvl = cfg.n_levels - 1 - i
            parts = [] if out is None else [out]
            parts.append(feats[lvl])
            if hist is not None:
                parts.append(hist[lvl])
            out = deconv(torch.cat(parts, dim=1) if len(parts) > 1 else parts[0])
            if lvl > 0:
                out = F.leaky_relu(norm(out), 0.2)
        return torch.sigmoid(out), embedding


class ImageDiscriminator(nn.Module):
    """DCGAN-style patch classifier; optionally embedding-conditioned."""

    def __init__(self, config: GeneratorConfig, conditional: bool = True):
        super().__init__()
        self.conditional = conditional
        in_ch = 3 + (config.embed_dim if conditional else 0)
        ch = config.channels
        layers: list[nn.Module] = []
        for lvl, c in enumerate(ch):
            layers.append(nn.Conv2d(in_ch, c, 4, 2, 1))
            if lvl > 0:
                layers.append(nn.InstanceNorm2d(c, affine=True))
            layers.append(nn.LeakyReLU(0.2))
            in_ch = c
        layers.append(nn.Conv2d(in_ch, 1, 1))
        self.body = nn.Sequential(*layers)

    def forward(self, image: torch.Tensor, conditioning: torch.Tensor | None = None) -> torch.Tensor:
        if self.conditional:
            if conditioning is None:
                raise ValidationError("conditional discriminator needs a conditioning input")
            if conditioning.shape[-2:] != image.shape[-2:]:
                raise ValidationError("conditioning must be tiled to the image size")
            image = torch.cat([image, conditioning], dim=1)
        logits = self.body(image)
        return torch.sigmoid(logits.mean(dim=(1, 2, 3))).clamp(SCORE_EPS, 1.0 - SCORE_EPS)


class EmbeddingDiscriminator(nn.Module):
    """Small fully connected classifier on the generator bottleneck vector."""

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        e = config.embed_dim
        h1, h2 = max(16, e // 2), max(8, e // 4)
        self.body = nn.Sequential(
            nn.Linear(e, h1), nn.LeakyReLU(0.2),
            nn.Linear(h1, h2), nn.LeakyReLU(0.2),
            nn.Linear(h2, 1),
        )
        self.embed_dim = e

    def forward(self, e: torch.Tensor) -> torch.Tensor:
        if e.shape[-1] != self.embed_dim:
            raise ValidationError(
                f"embedding dim {e.shape[-1]} does not match discriminator ({self.embed_dim})"
            )
        return torch.sigmoid(self.body(e).squeeze(-1)).clamp(SCORE_EPS, 1.0 - SCORE_EPS)


class ClipDiscriminator(nn.Module):
    """Spatio-temporal classifier over a fixed-length window of frames."""

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.clip_len = config.clip_len
        bf = config.base_filters
        in_ch = 3 + config.embed_dim
        self.body = nn.Sequential(
            nn.Conv3d(in_ch, bf, (3, 4, 4), (1, 2, 2), 1), nn.LeakyReLU(0.2),
            nn.Conv3d(bf, 2 * bf, (3, 4, 4), (2, 2, 2), 1),
            nn.InstanceNorm3d(2 * bf, affine=True), nn.LeakyReLU(0.2),
            nn.Conv3d(2 * bf, 4 * bf, (3, 4, 4), (2, 2, 2), 1),
            nn.InstanceNorm3d(4 * bf, affine=True), nn.LeakyReLU(0.2),
            nn.Conv3d(4 * bf, 1, 1),
        )

    def forward(self, clip: torch.Tensor, conditioning: torch.Tensor) -> torch.Tensor:
        """Score a (B,3,T,H,W) clip with (B,E,T,H,W) per-frame conditioning."""
        if clip.shape[2] != self.clip_len:
            raise ValidationError(
                f"clip length {clip.shape[2]} does not match window {self.clip_len}"
            )
        if conditioning.shape[2:] != clip.shape[2:]:
            raise ValidationError("conditioning must be tiled per frame to the clip size")
        logits = self.body(torch.cat([clip, conditioning], dim=1))
        return torch.sigmoid(logits.mean(dim=(1, 2, 3, 4))).clamp(SCORE_EPS, 1.0 - SCORE_EPS)


def _dcgan_init(module: nn.Module, gen: torch.Generator) -> None:
    """Zero-mean Gaussian init (std 0.02), norm scales around 1."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.Conv3d, nn.ConvTranspose2d, nn.Linear)):
            with torch.no_grad():
                m.weight.copy_(torch.randn(m.weight.shape, generator=gen) * 0.02)
                if m.bias is not None:
                    m.bias.zero_()
        elif isinstance(m, (nn.InstanceNorm2d, nn.InstanceNorm3d)) and m.affine:
            with torch.no_grad():
                m.weight.copy_(1.0 + torch.randn(m.weight.shape, generator=gen) * 0.02)
                m.bias.zero_()


@dataclass
class ModelBundle:
    """Generator + the three discriminators with their shared configuration."""

    config: GeneratorConfig
    generator: Generator
    image_disc: ImageDiscriminator
    embed_disc: EmbeddingDiscriminator
    clip_disc: ClipDiscriminator
    step: int = 0

    def generator_parameters(self):
        return list(self.generator.parameters())

    def discriminator_parameters(self):
        return (
            list(self.image_disc.parameters())
            + list(self.embed_disc.parameters())
            + list(self.clip_disc.parameters())
        )

    def modules_by_name(self) -> dict[str, nn.Module]:
        return {
            "g": self.generator,
            "di": self.image_disc,
            "de": self.embed_disc,
            "dv": self.clip_disc,
        }


def make_bundle(config: GeneratorConfig, seed: int = 0) -> ModelBundle:
    gen = torch.Generator().manual_seed(seed)
    g = Generator(config)
    di = ImageDiscriminator(config, conditional=True)
    de = EmbeddingDiscriminator(config)
    dv = ClipDiscriminator(config)
    for m in (g, di, de, dv):
        _dcgan_init(m, gen)
    return ModelBundle(config, g, di, de, dv)


@dataclass
class BaselineBundle:
    """Generator/discriminator pair(s) for the baseline objectives.

    The cycle baseline holds a second generator mapping the opposite
    direction and one unconditional discriminator per video.
    """

    kind: str
    config: GeneratorConfig
    generator: Generator
    disc: ImageDiscriminator
    generator_back: Generator | None = None
    disc_back: ImageDiscriminator | None = None
    step: int = 0

    def generator_parameters(self):
        params = list(self.generator.parameters())
        if self.generator_back is not None:
            params += list(self.generator_back.parameters())
        return params

    def discriminator_parameters(self):
        params = list(self.disc.parameters())
        if self.disc_back is not None:
            params += list(self.disc_back.parameters())
        return params

    def modules_by_name(self) -> dict[str, nn.Module]:
        out = {"g": self.generator, "d": self.disc}
        if self.generator_back is not None:
            out["g_back"] = self.generator_back
        if self.disc_back is not None:
            out["d_back"] = self.disc_back
        return out


def make_baseline_bundle(config: GeneratorConfig, seed: int, kind: str) -> BaselineBundle:
    from .losses import BASELINE_KINDS  # cycle needs the aux pair

    if kind not in BASELINE_KINDS:
        raise ValidationError(f"unknown baseline kind {kind!r}; choose from {BASELINE_KINDS}")
    if config.history_len != 0:
        raise ValidationError("baseline bundles are image-stage only (history_len must be 0)")
    gen = torch.Generator().manual_seed(seed)
    g = Generator(config)
    d = ImageDiscriminator(config, conditional=False)
    modules = [g, d]
    g2 = d2 = None
    if kind == "cycle":
        g2 = Generator(config)
        d2 = ImageDiscriminator(config, conditional=False)
        modules += [g2, d2]
    for m in modules:
        _dcgan_init(m, gen)
    return BaselineBundle(kind, config, g, d, generator_back=g2, disc_back=d2)


def copy_matching_parameters(src: nn.Module, dst: nn.Module) -> list[str]:
    """Copy src parameters into dst where names match.

    Shapes that differ only by a larger input-channel extent in ``dst`` are
    copied into the leading slice (history-path channels stay freshly
    initialized). Returns the names that were copied.
    """
    src_params = dict(src.named_parameters())
    copied = []
    with torch.no_grad():
        for name, p in dst.named_parameters():
            q = src_params.get(name)
            if q is None:
                continue
            if q.shape == p.shape:
                p.copy_(q)
                copied.append(name)
                continue
            if q.dim() == p.dim():
                diff = [i for i in range(q.dim()) if q.shape[i] != p.shape[i]]
                if len(diff) == 1 and p.shape[diff[0]] > q.shape[diff[0]]:
                    sl = [slice(None)] * q.dim()
                    sl[diff[0]] = slice(0, q.shape[diff[0]])
                    p[tuple(sl)] = q
                    copied.append(f"{name} (partial)")
    return copied


# ---------------------------------------------------------------------------
# numpy-facing functional wrappers


def to_chw(img: np.ndarray) -> torch.Tensor:
    """HxWx3 [0,1] array -> (3,H,W) float32 tensor."""
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValidationError(f"expected HxWx3 image, got shape {img.shape}")
    return torch.from_numpy(np.ascontiguousarray(np.transpose(img, (2, 0, 1)))).float()


def from_chw(t: torch.Tensor) -> np.ndarray:
    return np.transpose(t.detach().cpu().numpy(), (1, 2, 0)).astype(np.float32)


def forward_generator_image(bundle: ModelBundle | BaselineBundle, blended: np.ndarray) -> dict:
    """Run the image path on one HxWx3 blended patch."""
    if bundle.config.history_len != 0:
        raise ValidationError("bundle is a video model; use forward_generator_video")
    with torch.no_grad():
        out, e = bundle.generator(to_chw(blended).unsqueeze(0))
    return {"output": from_chw(out[0]), "embedding": e[0].numpy().copy()}


def forward_generator_video(
    bundle: ModelBundle, blended: np.ndarray, history: list[np.ndarray]
) -> dict:
    """Run the video path: blended HxWx3 input plus N previous output frames."""
    with torch.no_grad():
        hist = [to_chw(h).unsqueeze(0) for h in history]
        out, e = bundle.generator(to_chw(blended).unsqueeze(0), hist)
    return {"output": from_chw(out[0]), "embedding": e[0].numpy().copy()}


def _as_conditioning(bundle, conditioning, h: int, w: int) -> torch.Tensor:
    c = torch.as_tensor(np.asarray(conditioning), dtype=torch.float32)
    if c.dim() == 1:
        c = tile_embedding(c, h, w)
    if c.dim() != 3:
        raise ValidationError(f"conditioning must be (E,) or (E,H,W), got {tuple(c.shape)}")
    return c.unsqueeze(0)


def score_image_disc(bundle: ModelBundle, image: np.ndarray, conditioning) -> float:
    h, w = image.shape[:2]
    with torch.no_grad():
        s = bundle.image_disc(to_chw(image).unsqueeze(0), _as_conditioning(bundle, conditioning, h, w))
    return float(s[0])


def score_embedding_disc(bundle: ModelBundle, e: np.ndarray) -> float:
    with torch.no_grad():
        s = bundle.embed_disc(torch.as_tensor(np.asarray(e), dtype=torch.float32).unsqueeze(0))
    return float(s[0])


def score_video_disc(bundle: ModelBundle, clip: np.ndarray, conditioning) -> float:
    """Score a (T,H,W,3) clip; conditioning is (T,E) or (T,E,H,W)."""
    t, h, w = clip.shape[0], clip.shape[1], clip.shape[2]
    frames = torch.stack([to_chw(f) for f in clip], dim=1).unsqueeze(0)  # (1,3,T,H,W)
    c = torch.as_tensor(np.asarray(conditioning), dtype=torch.float32)
    if c.dim() == 2:
        c = torch.stack([tile_embedding(c[i], h, w) for i in range(t)], dim=1)
    elif c.dim() == 3:
        raise ValidationError("per-frame conditioning must be (T,E) or (T,E,H,W)")
    else:
        c = c.permute(1, 0, 2, 3)
    with torch.no_grad():
        s = bundle.clip_disc(frames, c.unsqueeze(0))
    return float(s[0])
