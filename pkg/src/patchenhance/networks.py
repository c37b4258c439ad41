"""Learnable components: content/quality/style encoders, generators,
the content discriminator, and per-domain image discriminators.

Encoders and generators follow an unshared UNIT-style layout: content
encoders keep a spatial map at 1/4 resolution, quality/style encoders
pool to a vector, generators upsample back to the patch and squash to
[0,1]. Vector codes are broadcast over the content map's spatial grid
and concatenated channel-wise before generation.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field, fields

import torch
import torch.nn as nn
import torch.nn.functional as F

CONTENT_ROLES = ("content_L", "content_S", "content_T")
VECTOR_ROLES = ("quality", "style")
GENERATOR_NAMES = ("G_L", "G_HS", "G_HT")
IMAGE_DOMAINS = ("L", "H", "T")

CHECKPOINT_VERSION = 1


class ConfigError(Exception):
    pass


@dataclass
class NetConfig:
    patch_size: int = 128
    content_channels: int = 256
    quality_dim: int = 8
    style_dim: int = 8
    residual_blocks: int = 4
    base_width: int = 64
    init_std: float = 0.02

    def validate(self) -> None:
        if self.patch_size % 4 != 0 or self.patch_size < 4:
            raise ConfigError(f"patch_size must be a positive multiple of 4, got {self.patch_size}")
        if self.init_std <= 0:
            raise ConfigError(f"init_std must be > 0, got {self.init_std}")
        for name in ("content_channels", "quality_dim", "style_dim", "base_width"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.residual_blocks < 0:
            raise ConfigError("residual_blocks must be >= 0")


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.conv2 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.norm1 = nn.InstanceNorm2d(channels, affine=False)
        self.norm2 = nn.InstanceNorm2d(channels, affine=False)

    def forward(self, x):
        h = F.relu(self.norm1(self.conv1(x)))
        h = self.norm2(self.conv2(h))
        return x + h


class ContentEncoder(nn.Module):
    """3 -> content_channels spatial map at 1/4 resolution."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        w = cfg.base_width
        self.stem = nn.Sequential(
            nn.Conv2d(3, w, 7, 1, 3),
            nn.InstanceNorm2d(w),
            nn.ReLU(inplace=True),
            nn.Conv2d(w, 2 * w, 3, 2, 1),
            nn.InstanceNorm2d(2 * w),
            nn.ReLU(inplace=True),
            nn.Conv2d(2 * w, cfg.content_channels, 3, 2, 1),
            nn.InstanceNorm2d(cfg.content_channels),
            nn.ReLU(inplace=True),
        )
        self.blocks = nn.Sequential(*[ResidualBlock(cfg.content_channels) for _ in range(cfg.residual_blocks)])

    def forward(self, x):
        return self.blocks(self.stem(x))


class VectorEncoder(nn.Module):
    """3 -> pooled code vector (quality or style)."""

    def __init__(self, cfg: NetConfig, out_dim: int):
        super().__init__()
        w = cfg.base_width
        self.features = nn.Sequential(
            nn.Conv2d(3, w, 3, 2, 1),
            nn.ReLU(inplace=True),
            nn.Conv2d(w, 2 * w, 3, 2, 1),
            nn.ReLU(inplace=True),
            nn.Conv2d(2 * w, 4 * w, 3, 2, 1),
            nn.ReLU(inplace=True),
            nn.Conv2d(4 * w, 4 * w, 3, 2, 1),
            nn.ReLU(inplace=True),
        )
        self.head = nn.Conv2d(4 * w, out_dim, 1)

    def forward(self, x):
        h = self.features(x)
        h = F.adaptive_avg_pool2d(h, 1)
        return self.head(h).flatten(1)


class Generator(nn.Module):
    """(content map [+ broadcast code]) -> patch in [0,1]."""

    def __init__(self, cfg: NetConfig, code_dim: int = 0):
        super().__init__()
        self.code_dim = code_dim
        w = cfg.base_width
        cc = cfg.content_channels
        self.proj = nn.Conv2d(cc + code_dim, cc, 1)
        self.blocks = nn.Sequential(*[ResidualBlock(cc) for _ in range(cfg.residual_blocks)])
        self.up = nn.Sequential(
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(cc, 2 * w, 3, 1, 1),
            nn.InstanceNorm2d(2 * w),
            nn.ReLU(inplace=True),
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(2 * w, w, 3, 1, 1),
            nn.InstanceNorm2d(w),
            nn.ReLU(inplace=True),
            nn.Conv2d(w, 3, 7, 1, 3),
            nn.Sigmoid(),
        )

    def forward(self, content, code=None):
        if self.code_dim == 0:
            if code is not None:
                raise ValueError("this generator takes content only, got a code")
            h = content
        else:
            if code is None:
                raise ValueError(f"this generator requires a code of dim {self.code_dim}")
            if code.shape[1] != self.code_dim:
                raise ValueError(f"code dim {code.shape[1]} != expected {self.code_dim}")
            grid = code[:, :, None, None].expand(-1, -1, content.shape[2], content.shape[3])
            h = torch.cat([content, grid], dim=1)
        return self.up(self.blocks(self.proj(h)))


class ContentDiscriminator(nn.Module):
    """Content map -> logits over the 3 origin domains {L, S, T}."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        w = cfg.base_width
        self.net = nn.Sequential(
            nn.Conv2d(cfg.content_channels, 2 * w, 3, 2, 1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(2 * w, 2 * w, 3, 2, 1),
            nn.LeakyReLU(0.2, inplace=True),
        )
        self.head = nn.Linear(2 * w, 3)

    def forward(self, content):
        h = self.net(content)
        h = F.adaptive_avg_pool2d(h, 1).flatten(1)
        return self.head(h)


class ImageDiscriminator(nn.Module):
    """Patch -> realness logit."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        w = cfg.base_width
        self.net = nn.Sequential(
            nn.Conv2d(3, w, 3, 2, 1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(w, 2 * w, 3, 2, 1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(2 * w, 4 * w, 3, 2, 1),
            nn.LeakyReLU(0.2, inplace=True),
        )
        self.head = nn.Linear(4 * w, 1)

    def forward(self, x):
        h = self.net(x)
        h = F.adaptive_avg_pool2d(h, 1).flatten(1)
        return self.head(h)


@dataclass
class ModelBundle:
    enc_content_low: nn.Module
    enc_content_src: nn.Module
    enc_content_tgt: nn.Module
    enc_quality: nn.Module
    enc_style: nn.Module
    gen_low: nn.Module
    gen_high_src: nn.Module
    gen_high_tgt: nn.Module
    disc_content: nn.Module
    disc_img_low: nn.Module
    disc_img_high: nn.Module
    disc_img_tgt: nn.Module
    config: NetConfig
    mean_target_style: torch.Tensor | None = None

    def modules(self) -> dict[str, nn.Module]:
        return {
            f.name: getattr(self, f.name)
            for f in fields(self)
            if isinstance(getattr(self, f.name), nn.Module)
        }

    def generator_side(self) -> list[nn.Parameter]:
        names = (
            "enc_content_low", "enc_content_src", "enc_content_tgt",
            "enc_quality", "enc_style", "gen_low", "gen_high_src", "gen_high_tgt",
        )
        return [p for n in names for p in getattr(self, n).parameters()]

    def discriminator_side(self) -> list[nn.Parameter]:
        names = ("disc_content", "disc_img_low", "disc_img_high", "disc_img_tgt")
        return [p for n in names for p in getattr(self, n).parameters()]

    def train(self) -> None:
        for m in self.modules().values():
            m.train()

    def eval(self) -> None:
        for m in self.modules().values():
            m.eval()


def init_model(config: NetConfig, seed: int = 0) -> ModelBundle:
    """Build the full bundle with N(0, init_std^2) weights and zero biases."""
    config.validate()
    bundle = ModelBundle(
        enc_content_low=ContentEncoder(config),
        enc_content_src=ContentEncoder(config),
        enc_content_tgt=ContentEncoder(config),
        enc_quality=VectorEncoder(config, config.quality_dim),
        enc_style=VectorEncoder(config, config.style_dim),
        gen_low=Generator(config, code_dim=config.quality_dim),
        gen_high_src=Generator(config, code_dim=0),
        gen_high_tgt=Generator(config, code_dim=config.style_dim),
        disc_content=ContentDiscriminator(config),
        disc_img_low=ImageDiscriminator(config),
        disc_img_high=ImageDiscriminator(config),
        disc_img_tgt=ImageDiscriminator(config),
        config=config,
    )
    gen = torch.Generator().manual_seed(seed)
    for module in bundle.modules().values():
        for layer in module.modules():
            if isinstance(layer, (nn.Conv2d, nn.Linear)):
                with torch.no_grad():
                    layer.weight.copy_(
                        torch.randn(layer.weight.shape, generator=gen) * config.init_std
                    )
                    if layer.bias is not None:
                        layer.bias.zero_()
    return bundle


def encode(bundle: ModelBundle, role: str, patch: torch.Tensor) -> torch.Tensor:
    """Run the encoder for a role on an NCHW batch."""
    _check_patch(bundle.config, patch)
    encoders = {
        "content_L": bundle.enc_content_low,
        "content_S": bundle.enc_content_src,
        "content_T": bundle.enc_content_tgt,
        "quality": bundle.enc_quality,
        "style": bundle.enc_style,
    }
    if role not in encoders:
        raise ValueError(f"unknown encoder role {role!r}, expected one of {sorted(encoders)}")
    return encoders[role](patch)


def generate(
    bundle: ModelBundle, gen: str, content: torch.Tensor, code: torch.Tensor | None = None
) -> torch.Tensor:
    generators = {"G_L": bundle.gen_low, "G_HS": bundle.gen_high_src, "G_HT": bundle.gen_high_tgt}
    if gen not in generators:
        raise ValueError(f"unknown generator {gen!r}, expected one of {sorted(generators)}")
    return generators[gen](content, code)


def discriminate_content(bundle: ModelBundle, content: torch.Tensor) -> torch.Tensor:
    """Probability vector over origin domains {L, S, T}, rows sum to 1."""
    return torch.softmax(bundle.disc_content(content), dim=1)


def discriminate_image(bundle: ModelBundle, domain: str, patch: torch.Tensor) -> torch.Tensor:
    discs = {"L": bundle.disc_img_low, "H": bundle.disc_img_high, "T": bundle.disc_img_tgt}
    if domain not in discs:
        raise ValueError(f"unknown image domain {domain!r}, expected one of {sorted(discs)}")
    return torch.sigmoid(discs[domain](patch))


def _check_patch(config: NetConfig, patch: torch.Tensor) -> None:
    if patch.ndim != 4 or patch.shape[1] != 3:
        raise ValueError(f"expected NCHW batch with 3 channels, got {tuple(patch.shape)}")
    if patch.shape[2] != config.patch_size or patch.shape[3] != config.patch_size:
        raise ValueError(
            f"patch size {tuple(patch.shape[2:])} != configured {config.patch_size}"
        )


def config_hash(config: NetConfig) -> str:
    text = ",".join(f"{f.name}={getattr(config, f.name)}" for f in fields(config))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def save_bundle(bundle: ModelBundle, path: str, iteration: int = 0, seed: int = 0) -> None:
    """Versioned checkpoint: text header + named parameter tensors."""
    header = (
        f"patchenhance-checkpoint v{CHECKPOINT_VERSION}\n"
        f"config={vars(bundle.config)}\n"
        f"iteration={iteration}\nseed={seed}\n\n"
    )
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": vars(bundle.config),
        "iteration": iteration,
        "seed": seed,
        "state": {name: m.state_dict() for name, m in bundle.modules().items()},
        "mean_target_style": bundle.mean_target_style,
    }
    buf = io.BytesIO()
    torch.save(payload, buf)
    with open(path, "wb") as fh:
        fh.write(header.encode())
        fh.write(buf.getvalue())


def load_bundle(path: str) -> tuple[ModelBundle, int]:
    with open(path, "rb") as fh:
        raw = fh.read()
    sep = raw.index(b"\n\n")
    payload = torch.load(io.BytesIO(raw[sep + 2 :]), weights_only=False)
    if payload["version"] != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload['version']}")
    config = NetConfig(**payload["config"])
    bundle = init_model(config, seed=payload["seed"])
    for name, state in payload["state"].items():
        getattr(bundle, name).load_state_dict(state)
    bundle.mean_target_style = payload["mean_target_style"]
    return bundle, payload["iteration"]
