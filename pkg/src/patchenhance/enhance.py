"""Inference: turn a full low-quality image into an enhanced,
style-unified one, plus the paired evaluation harness.

Per patch: LOW patches go through the two-stage route (quality lift via
the high-quality generator, then style alignment with the frozen mean
target-style code); HIGH patches are either style-aligned or passed
through when they already sit in the target style cluster.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from . import quality as qa
from .degrade import PairedSample
from .imagedata import DataError, ImageRecord, PatchRecord, patchify, reassemble
from .metrics import MetricReport, MetricRow, psnr, ssim
from .networks import ModelBundle
from .quality import ClassifierParams, QualityLabel, QualityScore
from .stylecluster import AEParams, StyleDomains, embed_batch


@dataclass
class EnhanceConfig:
    patch_size: int = 128
    quality_threshold: float = 0.5
    style_align_all: bool = True
    pass_through_target: bool = True

    def validate(self) -> None:
        if not 0.0 <= self.quality_threshold <= 1.0:
            raise ValueError(f"quality_threshold must be in [0,1], got {self.quality_threshold}")


@dataclass
class StyleIndex:
    """Nearest-centroid membership test for the target style cluster."""

    ae_params: AEParams
    centroids: np.ndarray
    target_id: int

    @classmethod
    def from_domains(cls, ae_params: AEParams, domains: StyleDomains) -> "StyleIndex":
        return cls(ae_params=ae_params, centroids=domains.centroids, target_id=domains.target_id)

    def is_target_style(self, patch: PatchRecord) -> bool:
        vec = embed_batch([patch], self.ae_params)[0].vector
        d2 = ((self.centroids - vec[None, :]) ** 2).sum(axis=1)
        return int(d2.argmin()) == self.target_id


def _to_tensor(pixels: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(pixels.astype(np.float32)).permute(2, 0, 1)[None]


def _to_pixels(t: torch.Tensor) -> np.ndarray:
    return t[0].permute(1, 2, 0).clamp(0, 1).numpy().astype(np.float32)


def enhance_patch(
    patch: PatchRecord,
    bundle: ModelBundle,
    score: QualityScore,
    config: EnhanceConfig | None = None,
    style_index: StyleIndex | None = None,
) -> PatchRecord:
    config = config or EnhanceConfig(patch_size=patch.patch_size)
    if bundle.mean_target_style is None:
        raise RuntimeError("bundle has no mean target style code; run compute_target_style_code")
    style_code = bundle.mean_target_style[None, :]
    x = _to_tensor(patch.pixels)
    with torch.no_grad():
        if score.label is QualityLabel.LOW:
            lifted = bundle.gen_high_src(bundle.enc_content_low(x))
            out = bundle.gen_high_tgt(bundle.enc_content_src(lifted), style_code)
        else:
            if (
                config.pass_through_target
                and style_index is not None
                and style_index.is_target_style(patch)
            ):
                return patch
            if not config.style_align_all:
                return patch
            out = bundle.gen_high_tgt(bundle.enc_content_src(x), style_code)
    return PatchRecord(
        pixels=_to_pixels(out),
        grid_row=patch.grid_row,
        grid_col=patch.grid_col,
        parent_id=patch.parent_id,
    )


def enhance_image(
    image: ImageRecord,
    bundle: ModelBundle,
    qa_params: ClassifierParams,
    config: EnhanceConfig | None = None,
    style_index: StyleIndex | None = None,
) -> ImageRecord:
    """patchify -> assess -> enhance each patch -> reassemble."""
    config = config or EnhanceConfig()
    config.validate()
    grid = patchify(image, config.patch_size)
    scores = qa.batch_assess(grid.patches, qa_params, config.quality_threshold)
    enhanced = [
        enhance_patch(p, bundle, s, config, style_index)
        for p, s in zip(grid.patches, scores)
    ]
    grid.patches = enhanced
    out = reassemble(grid)
    out.source_path = image.source_path
    return out


def evaluate(
    pairs: list[PairedSample],
    bundle: ModelBundle,
    qa_params: ClassifierParams,
    config: EnhanceConfig | None = None,
    style_index: StyleIndex | None = None,
) -> MetricReport:
    """Enhance each degraded image and score PSNR/SSIM against its clean original."""
    if not pairs:
        raise DataError("evaluation requires at least one pair")
    rows = []
    for i, pair in enumerate(pairs):
        out = enhance_image(pair.degraded, bundle, qa_params, config, style_index)
        name = pair.clean.source_path or f"pair_{i}"
        rows.append(MetricRow(name=name, psnr=psnr(pair.clean, out), ssim=ssim(pair.clean, out)))
    return MetricReport(rows=rows)
