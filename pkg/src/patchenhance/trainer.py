"""The optimization loop: per-iteration translations, re-feeding
reconstructions, alternating discriminator/generator updates,
checkpointing, and target-style-code extraction.

Routing of re-fed images: each translated image is re-encoded by the
content encoder of the domain it now inhabits (e.g. x^{L->H} lives in
the high-quality source domain, so E^C_{x_H^S} re-encodes it).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import torch

from . import losses
from .imagedata import DataError
from .losses import LossReport, LossWeights
from .networks import ModelBundle, NetConfig, init_model


@dataclass
class TrainConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 32
    max_iters: int = 300_000
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    checkpoint_every: int = 10_000
    patch_size: int = 128

    def validate(self) -> None:
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        self.weights.validate()


@dataclass
class TranslationBatch:
    x_low: torch.Tensor
    x_src: torch.Tensor
    x_tgt: torch.Tensor
    z_c_low: torch.Tensor
    z_c_src: torch.Tensor
    z_c_tgt: torch.Tensor
    z_quality: torch.Tensor
    z_style: torch.Tensor
    x_low2high: torch.Tensor
    x_high2low: torch.Tensor
    x_src2tgt: torch.Tensor
    x_tgt2src: torch.Tensor
    x_low_hat: torch.Tensor
    x_src_hat1: torch.Tensor
    x_src_hat2: torch.Tensor
    x_tgt_hat: torch.Tensor


def forward_cycles(
    bundle: ModelBundle, x_low: torch.Tensor, x_src: torch.Tensor, x_tgt: torch.Tensor
) -> TranslationBatch:
    """All four translations plus the four re-fed reconstructions."""
    if not (x_low.shape == x_src.shape == x_tgt.shape):
        raise ValueError(
            f"domain batches must share shape, got {tuple(x_low.shape)}, "
            f"{tuple(x_src.shape)}, {tuple(x_tgt.shape)}"
        )
    z_c_low = bundle.enc_content_low(x_low)
    z_c_src = bundle.enc_content_src(x_src)
    z_c_tgt = bundle.enc_content_tgt(x_tgt)
    z_quality = bundle.enc_quality(x_low)
    z_style = bundle.enc_style(x_tgt)

    x_low2high = bundle.gen_high_src(z_c_low)
    x_high2low = bundle.gen_low(z_c_src, z_quality)
    x_src2tgt = bundle.gen_high_tgt(z_c_src, z_style)
    x_tgt2src = bundle.gen_high_src(z_c_tgt)

    x_low_hat = bundle.gen_low(bundle.enc_content_src(x_low2high), z_quality)
    x_src_hat1 = bundle.gen_high_src(bundle.enc_content_low(x_high2low))
    x_src_hat2 = bundle.gen_high_src(bundle.enc_content_tgt(x_src2tgt))
    x_tgt_hat = bundle.gen_high_tgt(bundle.enc_content_src(x_tgt2src), z_style)

    return TranslationBatch(
        x_low=x_low, x_src=x_src, x_tgt=x_tgt,
        z_c_low=z_c_low, z_c_src=z_c_src, z_c_tgt=z_c_tgt,
        z_quality=z_quality, z_style=z_style,
        x_low2high=x_low2high, x_high2low=x_high2low,
        x_src2tgt=x_src2tgt, x_tgt2src=x_tgt2src,
        x_low_hat=x_low_hat, x_src_hat1=x_src_hat1,
        x_src_hat2=x_src_hat2, x_tgt_hat=x_tgt_hat,
    )


@dataclass
class TrainerState:
    bundle: ModelBundle
    opt_disc: torch.optim.Adam
    opt_gen: torch.optim.Adam
    config: TrainConfig
    iteration: int = 0
    sampler: torch.Generator | None = None


def make_state(bundle: ModelBundle, config: TrainConfig) -> TrainerState:
    config.validate()
    betas = (config.beta1, config.beta2)
    return TrainerState(
        bundle=bundle,
        opt_disc=torch.optim.Adam(bundle.discriminator_side(), lr=config.lr, betas=betas),
        opt_gen=torch.optim.Adam(bundle.generator_side(), lr=config.lr, betas=betas),
        config=config,
        sampler=torch.Generator().manual_seed(config.seed),
    )


def training_step(
    state: TrainerState, x_low: torch.Tensor, x_src: torch.Tensor, x_tgt: torch.Tensor
) -> LossReport:
    """One discriminator update on detached fakes, then one encoder/generator update."""
    bundle = state.bundle
    batch = forward_cycles(bundle, x_low, x_src, x_tgt)

    # --- discriminator phase (everything from the generator side detached) ---
    state.opt_disc.zero_grad(set_to_none=True)
    d_feat, _ = losses.adv_feature_loss(
        batch.z_c_low.detach(), batch.z_c_src.detach(), batch.z_c_tgt.detach(),
        bundle.disc_content,
    )
    d_img = _image_adv(bundle, batch, detached=True, generator_phase=False)
    d_total = d_feat + d_img
    d_total.backward()
    state.opt_disc.step()

    # --- encoder/generator phase against the updated discriminators ---
    state.opt_gen.zero_grad(set_to_none=True)
    _, e_feat = losses.adv_feature_loss(
        batch.z_c_low, batch.z_c_src, batch.z_c_tgt, bundle.disc_content
    )
    g_img = _image_adv(bundle, batch, detached=False, generator_phase=True)
    l_q = losses.quality_recon_loss(batch.x_low, batch.x_low_hat, batch.x_src, batch.x_src_hat1)
    l_t = losses.style_recon_loss(batch.x_tgt, batch.x_tgt_hat, batch.x_src, batch.x_src_hat2)
    l_c = losses.cross_consistency_loss(batch.x_src_hat1, batch.x_src_hat2)
    _, total = losses.combine_total(l_q, l_t, l_c, e_feat, g_img, state.config.weights)
    total.backward()
    state.opt_gen.step()
    state.iteration += 1

    return losses.total_loss(
        l_q.item(), l_t.item(), l_c.item(), e_feat.item(), g_img.item(),
        state.config.weights, d_loss=d_total.item(),
    )


def _image_adv(bundle: ModelBundle, batch: TranslationBatch, detached: bool, generator_phase: bool):
    """Sum the per-domain image GAN terms over the fixed real/fake pairings."""
    pairings = [
        (bundle.disc_img_low, [batch.x_low], [batch.x_high2low]),
        (bundle.disc_img_high, [batch.x_src], [batch.x_low2high, batch.x_tgt2src]),
        (bundle.disc_img_tgt, [batch.x_tgt], [batch.x_src2tgt]),
    ]
    total = 0.0
    for disc, reals, fakes in pairings:
        if detached:
            fakes = [f.detach() for f in fakes]
        d_loss, g_loss = losses.adv_image_loss(reals, fakes, disc)
        total = total + (g_loss if generator_phase else d_loss)
    return total


def train(
    x_low: torch.Tensor,
    x_src: torch.Tensor,
    x_tgt: torch.Tensor,
    net_config: NetConfig,
    config: TrainConfig,
    checkpoint_dir: str | None = None,
    log_path: str | None = None,
    resume_from: str | None = None,
) -> ModelBundle:
    """Full loop over pre-extracted domain patch tensors (N,3,P,P)."""
    config.validate()
    for name, t in (("X_L", x_low), ("X_H^S", x_src), ("X_H^T", x_tgt)):
        if t.shape[0] == 0:
            raise DataError(f"domain {name} is empty")

    torch.manual_seed(config.seed)
    if resume_from is not None:
        state = load_checkpoint(resume_from, config)
    else:
        state = make_state(init_model(net_config, seed=config.seed), config)

    log_fh = open(log_path, "a") if log_path else None
    if log_fh and state.iteration == 0:
        log_fh.write(LossReport.LOG_HEADER + "\n")
    try:
        while state.iteration < config.max_iters:
            bl = _sample(x_low, config.batch_size, state.sampler)
            bs = _sample(x_src, config.batch_size, state.sampler)
            bt = _sample(x_tgt, config.batch_size, state.sampler)
            report = training_step(state, bl, bs, bt)
            if log_fh:
                log_fh.write(report.log_line(state.iteration) + "\n")
            if checkpoint_dir and config.checkpoint_every > 0 and (
                state.iteration % config.checkpoint_every == 0
                or state.iteration == config.max_iters
            ):
                save_checkpoint(state, os.path.join(checkpoint_dir, f"ckpt_{state.iteration:08d}.pt"))
    finally:
        if log_fh:
            log_fh.close()
    if checkpoint_dir:
        save_checkpoint(state, os.path.join(checkpoint_dir, "ckpt_final.pt"))
    return state.bundle


def _sample(pool: torch.Tensor, batch_size: int, gen: torch.Generator) -> torch.Tensor:
    idx = torch.randint(0, pool.shape[0], (batch_size,), generator=gen)
    return pool[idx]


def compute_target_style_code(bundle: ModelBundle, x_tgt: torch.Tensor) -> torch.Tensor:
    """Mean style code over the target-domain patches; stored on the bundle."""
    if x_tgt.shape[0] == 0:
        raise DataError("target style domain is empty")
    with torch.no_grad():
        code = bundle.enc_style(x_tgt).mean(dim=0)
    bundle.mean_target_style = code
    return code


def save_checkpoint(state: TrainerState, path: str) -> None:
    """Atomic write: temp file then rename."""
    payload = {
        "iteration": state.iteration,
        "net_config": vars(state.bundle.config),
        "train_config_seed": state.config.seed,
        "model": {n: m.state_dict() for n, m in state.bundle.modules().items()},
        "opt_disc": state.opt_disc.state_dict(),
        "opt_gen": state.opt_gen.state_dict(),
        "sampler_state": state.sampler.get_state(),
        "torch_rng": torch.get_rng_state(),
        "mean_target_style": state.bundle.mean_target_style,
    }
    tmp = path + ".tmp"
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    torch.save(payload, tmp)
    os.replace(tmp, path)


def load_checkpoint(path: str, config: TrainConfig) -> TrainerState:
    payload = torch.load(path, weights_only=False)
    bundle = init_model(NetConfig(**payload["net_config"]), seed=payload["train_config_seed"])
    for name, sd in payload["model"].items():
        getattr(bundle, name).load_state_dict(sd)
    bundle.mean_target_style = payload["mean_target_style"]
    state = make_state(bundle, config)
    state.opt_disc.load_state_dict(payload["opt_disc"])
    state.opt_gen.load_state_dict(payload["opt_gen"])
    state.sampler.set_state(payload["sampler_state"])
    torch.set_rng_state(payload["torch_rng"])
    state.iteration = payload["iteration"]
    return state
