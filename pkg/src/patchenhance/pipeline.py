"""End-to-end experiment harness used by the CLI and the acceptance
suite: degrade a clean corpus, build the quality/style domains, train
the translators, and compare PSNR/SSIM before and after enhancement on
a held-out set.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np
import torch

from . import quality as qa
from . import stylecluster as sc
from . import trainer as tr
from .degrade import ArtifactSpec, DegradationSpec, IlluminationSpec, PairedSample, degrade
from .enhance import EnhanceConfig, StyleIndex, enhance_image, evaluate
from .imagedata import DataError, ImageRecord, PatchRecord, load_image, patchify
from .losses import LossWeights
from .metrics import MetricReport, MetricRow, psnr, ssim
from .networks import NetConfig
from .trainer import TrainConfig


def default_degradation() -> DegradationSpec:
    return DegradationSpec(
        illumination=IlluminationSpec(gradient_strength=0.65, center=(0.25, 0.25), radial_falloff=1.5),
        blur_sigma=1.0,
        artifacts=ArtifactSpec(count=2, radius_range=(4.0, 10.0), intensity_range=(-0.15, 0.15)),
        enabled=frozenset({"illum", "blur", "artifact"}),
    )


@dataclass
class ExperimentConfig:
    patch_size: int = 32
    k: int = 3
    seed: int = 0
    train_iters: int = 3000
    batch_size: int = 16
    holdout: int = 20
    quality_threshold: float = 0.5
    embedding_dim: int = 16
    net: NetConfig | None = None
    degradation: DegradationSpec = field(default_factory=default_degradation)
    qa_epochs: int = 6
    ae_epochs: int = 8
    style_align_all: bool = False

    def net_config(self) -> NetConfig:
        if self.net is not None:
            return self.net
        return NetConfig(
            patch_size=self.patch_size,
            content_channels=32,
            quality_dim=8,
            style_dim=8,
            residual_blocks=2,
            base_width=16,
        )


@dataclass
class ExperimentResult:
    baseline: MetricReport
    enhanced: MetricReport
    bundle: object
    qa_params: qa.ClassifierParams
    ae_params: sc.AEParams
    domains: sc.StyleDomains
    domain_sizes: dict[str, int]

    @property
    def psnr_gain(self) -> float:
        return self.enhanced.mean_psnr - self.baseline.mean_psnr

    @property
    def ssim_gain(self) -> float:
        return self.enhanced.mean_ssim - self.baseline.mean_ssim


def degrade_corpus(images: list[ImageRecord], spec: DegradationSpec, seed: int) -> list[PairedSample]:
    return [degrade(img, spec, seed=seed + i) for i, img in enumerate(images)]


def _patch_pixels(images: list[ImageRecord], patch_size: int) -> list[PatchRecord]:
    out: list[PatchRecord] = []
    for img in images:
        out.extend(patchify(img, patch_size).patches)
    return out


def _as_tensor(patches: list[PatchRecord]) -> torch.Tensor:
    return torch.from_numpy(
        np.stack([p.pixels for p in patches]).astype(np.float32)
    ).permute(0, 3, 1, 2)


def train_quality_on_pairs(
    clean: list[ImageRecord], cfg: ExperimentConfig
) -> qa.ClassifierParams:
    """HIGH = clean patches, LOW = the same patches individually degraded."""
    clean_patches = _patch_pixels(clean, cfg.patch_size)
    low_patches = []
    for i, p in enumerate(clean_patches):
        rec = ImageRecord(pixels=p.pixels, source_path=p.parent_id)
        low_patches.append(
            degrade(rec, cfg.degradation, seed=cfg.seed * 7919 + i).degraded.pixels
        )
    patches = [p.pixels for p in clean_patches] + low_patches
    labels = [1] * len(clean_patches) + [0] * len(low_patches)
    return qa.train_quality_classifier(
        patches,
        labels,
        qa.QAConfig(input_size=cfg.patch_size, epochs=cfg.qa_epochs, seed=cfg.seed),
    )


def build_domains(
    degraded: list[ImageRecord], qa_params: qa.ClassifierParams, cfg: ExperimentConfig
) -> tuple[list[PatchRecord], list[PatchRecord], list[PatchRecord], sc.AEParams, sc.StyleDomains]:
    """Quality partition then style clustering -> (X_L, X_H^S, X_H^T, AE, domains)."""
    patches = _patch_pixels(degraded, cfg.patch_size)
    part = qa.partition(patches, qa_params, cfg.quality_threshold)
    if not part.low or not part.high:
        raise DataError(
            f"degenerate quality partition: |low|={len(part.low)}, |high|={len(part.high)}"
        )
    ae_params = sc.train_style_autoencoder(
        part.high,
        sc.AEConfig(
            patch_size=cfg.patch_size,
            embedding_dim=cfg.embedding_dim,
            epochs=cfg.ae_epochs,
            seed=cfg.seed,
        ),
    )
    embeddings = sc.embed_batch(part.high, ae_params)
    domains = sc.cluster_styles(embeddings, cfg.k, seed=cfg.seed)
    tgt, src = [], []
    for patch, emb in zip(part.high, embeddings):
        if domains.assignments[emb.patch_ref] == domains.target_id:
            tgt.append(patch)
        else:
            src.append(patch)
    if not src:
        # every high patch landed in the target cluster; donate the ones
        # farthest from the target centroid so the source domain exists
        dists = [
            float(((e.vector - domains.centroids[domains.target_id]) ** 2).sum())
            for e in embeddings
        ]
        order = np.argsort(dists)[::-1][: max(1, len(tgt) // 4)]
        keep = set(order.tolist())
        src = [p for i, p in enumerate(tgt) if i in keep]
        tgt = [p for i, p in enumerate(tgt) if i not in keep]
    return part.low, src, tgt, ae_params, domains


def run_experiment(
    clean_images: list[ImageRecord],
    cfg: ExperimentConfig,
    checkpoint_dir: str | None = None,
    log_path: str | None = None,
) -> ExperimentResult:
    if len(clean_images) <= cfg.holdout:
        raise DataError(
            f"need more than holdout={cfg.holdout} images, got {len(clean_images)}"
        )
    train_clean = clean_images[: -cfg.holdout] if cfg.holdout else clean_images
    held_clean = clean_images[-cfg.holdout :] if cfg.holdout else []

    pairs = degrade_corpus(train_clean, cfg.degradation, seed=cfg.seed)
    qa_params = train_quality_on_pairs(train_clean, cfg)
    x_low, x_src, x_tgt, ae_params, domains = build_domains(
        [p.degraded for p in pairs], qa_params, cfg
    )

    train_cfg = TrainConfig(
        batch_size=cfg.batch_size,
        max_iters=cfg.train_iters,
        seed=cfg.seed,
        weights=LossWeights(),
        checkpoint_every=max(1, cfg.train_iters),
        patch_size=cfg.patch_size,
    )
    bundle = tr.train(
        _as_tensor(x_low),
        _as_tensor(x_src),
        _as_tensor(x_tgt),
        cfg.net_config(),
        train_cfg,
        checkpoint_dir=checkpoint_dir,
        log_path=log_path,
    )
    tr.compute_target_style_code(bundle, _as_tensor(x_tgt))

    held_pairs = degrade_corpus(held_clean, cfg.degradation, seed=cfg.seed + 10_000)
    enhance_cfg = EnhanceConfig(
        patch_size=cfg.patch_size,
        quality_threshold=cfg.quality_threshold,
        style_align_all=cfg.style_align_all,
    )
    style_index = StyleIndex.from_domains(ae_params, domains)
    baseline = MetricReport(
        rows=[
            MetricRow(
                name=p.clean.source_path or str(i),
                psnr=psnr(p.clean, p.degraded),
                ssim=ssim(p.clean, p.degraded),
            )
            for i, p in enumerate(held_pairs)
        ]
    )
    enhanced = evaluate(held_pairs, bundle, qa_params, enhance_cfg, style_index)
    return ExperimentResult(
        baseline=baseline,
        enhanced=enhanced,
        bundle=bundle,
        qa_params=qa_params,
        ae_params=ae_params,
        domains=domains,
        domain_sizes={"low": len(x_low), "src": len(x_src), "tgt": len(x_tgt)},
    )


def load_corpus(image_dir: str, size: int) -> list[ImageRecord]:
    from .imagedata import IMAGE_EXTENSIONS

    files = sorted(
        os.path.join(image_dir, f)
        for f in os.listdir(image_dir)
        if f.lower().endswith(IMAGE_EXTENSIONS)
    )
    if not files:
        raise DataError(f"no images in {image_dir!r}")
    return [load_image(f, size) for f in files]
