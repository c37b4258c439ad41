"""Training objectives.

Feature-level adversarial term is a 3-way domain-confusion game: the
content discriminator is trained with cross-entropy against the true
origin domain, while the encoders are trained to make its output
uniform. Image-level term is a non-saturating GAN loss per domain.
Reconstruction terms are per-pixel mean L1 so magnitudes are
resolution-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

PROB_EPS = 1e-7


class NumericError(Exception):
    pass


@dataclass
class LossWeights:
    lambda1: float = 0.1  # feature-level adversarial
    lambda2: float = 0.1  # image-level adversarial

    def validate(self) -> None:
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class LossReport:
    l_q: float
    l_t: float
    l_c: float
    l_adv_feat: float
    l_adv_img: float
    l_s: float
    total: float
    d_loss: float = float("nan")

    def log_line(self, iteration: int) -> str:
        return (
            f"{iteration}\t{self.l_q:.6f}\t{self.l_t:.6f}\t{self.l_c:.6f}\t"
            f"{self.l_s:.6f}\t{self.l_adv_feat:.6f}\t{self.l_adv_img:.6f}\t"
            f"{self.total:.6f}\t{self.d_loss:.6f}"
        )

    LOG_HEADER = "iter\tl_q\tl_t\tl_c\tl_s\tadv_feat\tadv_img\ttotal\td_loss"


def adv_feature_loss(z_low, z_src, z_tgt, disc_content) -> tuple[torch.Tensor, torch.Tensor]:
    """(discriminator CE on true origins, encoder confusion vs uniform)."""
    if not (z_low.shape == z_src.shape == z_tgt.shape):
        raise ValueError("content maps must share shape across domains")
    logits = torch.cat(
        [disc_content(z_low), disc_content(z_src), disc_content(z_tgt)], dim=0
    )
    n = z_low.shape[0]
    labels = torch.cat(
        [torch.full((n,), k, dtype=torch.long, device=logits.device) for k in range(3)]
    )
    d_loss = F.cross_entropy(logits, labels)
    # cross-entropy of predictions against the uniform target; minimum ln 3
    log_p = F.log_softmax(logits, dim=1)
    e_loss = -log_p.mean(dim=1).mean()
    return d_loss, e_loss


def adv_image_loss(reals, fakes, disc) -> tuple[torch.Tensor, torch.Tensor]:
    """Non-saturating GAN loss for one domain.

    reals/fakes are lists of batches; the per-sample terms of every
    listed batch are averaged with equal weight per batch.
    """
    reals = [reals] if torch.is_tensor(reals) else list(reals)
    fakes = [fakes] if torch.is_tensor(fakes) else list(fakes)
    if not reals or not fakes or any(b.shape[0] == 0 for b in reals + fakes):
        raise ValueError("real and fake batches must be non-empty")
    d_real = sum(-torch.log(_score(disc, b)).mean() for b in reals) / len(reals)
    d_fake = sum(-torch.log(1 - _score(disc, b.detach())).mean() for b in fakes) / len(fakes)
    g_loss = sum(-torch.log(_score(disc, b)).mean() for b in fakes) / len(fakes)
    return d_real + d_fake, g_loss


def _score(disc, batch) -> torch.Tensor:
    # disc emits a realness logit per sample
    out = disc(batch)
    if out.ndim > 1:
        out = out.flatten(1).mean(dim=1)
    return torch.sigmoid(out).clamp(PROB_EPS, 1 - PROB_EPS)


def recon_l1(x, x_hat) -> torch.Tensor:
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch: {tuple(x.shape)} vs {tuple(x_hat.shape)}")
    return (x - x_hat).abs().mean()


def quality_recon_loss(x_low, x_low_hat, x_src, x_src_hat1) -> torch.Tensor:
    """L1 over the quality cycle: x_L vs its re-feed, x_H^S vs its re-feed."""
    return recon_l1(x_low, x_low_hat) + recon_l1(x_src, x_src_hat1)


def style_recon_loss(x_tgt, x_tgt_hat, x_src, x_src_hat2) -> torch.Tensor:
    """L1 over the style cycle: x_H^T vs its re-feed, x_H^S vs its re-feed."""
    return recon_l1(x_tgt, x_tgt_hat) + recon_l1(x_src, x_src_hat2)


def cross_consistency_loss(x_src_hat1, x_src_hat2) -> torch.Tensor:
    """L1 between the quality-cycle and style-cycle reconstructions of x_H^S."""
    return recon_l1(x_src_hat1, x_src_hat2)


def combine_total(l_q, l_t, l_c, l_adv_feat, l_adv_img, weights: LossWeights):
    """total = (l_q + l_t + l_c) + lambda1*adv_feat + lambda2*adv_img.

    Works on floats and on tensors (the trainer backpropagates through it).
    """
    l_s = l_q + l_t + l_c
    return l_s, l_s + weights.lambda1 * l_adv_feat + weights.lambda2 * l_adv_img


def total_loss(
    l_q, l_t, l_c, l_adv_feat, l_adv_img, weights: LossWeights, d_loss=float("nan")
) -> LossReport:
    weights.validate()
    parts = {"l_q": l_q, "l_t": l_t, "l_c": l_c, "l_adv_feat": l_adv_feat, "l_adv_img": l_adv_img}
    vals = {}
    for name, v in parts.items():
        v = float(v)
        if not math.isfinite(v):
            raise NumericError(f"loss term {name} is not finite: {v}")
        vals[name] = v
    l_s, total = combine_total(
        vals["l_q"], vals["l_t"], vals["l_c"], vals["l_adv_feat"], vals["l_adv_img"], weights
    )
    return LossReport(
        l_q=vals["l_q"],
        l_t=vals["l_t"],
        l_c=vals["l_c"],
        l_adv_feat=vals["l_adv_feat"],
        l_adv_img=vals["l_adv_img"],
        l_s=l_s,
        total=total,
        d_loss=float(d_loss) if d_loss == d_loss else float("nan"),
    )
