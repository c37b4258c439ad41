"""Parametric degradation: uneven illumination, blur, and blob artifacts.

Produces the paired clean/degraded data used for metric evaluation and
for synthesizing quality-classifier training labels. Every function is
deterministic in (image, spec, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .imagedata import ImageRecord

COMPOSITION_ORDER = ("illum", "blur", "artifact")


@dataclass
class IlluminationSpec:
    gradient_strength: float = 0.5
    center: tuple[float, float] = (0.5, 0.5)  # normalized (x, y)
    radial_falloff: float = 1.5

    def validate(self) -> None:
        if not 0.0 <= self.gradient_strength <= 1.0:
            raise ValueError(f"gradient_strength must be in [0,1], got {self.gradient_strength}")
        if self.radial_falloff <= 0:
            raise ValueError(f"radial_falloff must be > 0, got {self.radial_falloff}")


@dataclass
class ArtifactSpec:
    count: int = 0
    radius_range: tuple[float, float] = (8.0, 24.0)
    intensity_range: tuple[float, float] = (-0.3, 0.3)

    def validate(self) -> None:
        if self.count < 0:
            raise ValueError(f"artifact count must be >= 0, got {self.count}")
        if self.radius_range[0] > self.radius_range[1]:
            raise ValueError(f"radius_range out of order: {self.radius_range}")
        if self.intensity_range[0] > self.intensity_range[1]:
            raise ValueError(f"intensity_range out of order: {self.intensity_range}")


@dataclass
class DegradationSpec:
    illumination: IlluminationSpec = field(default_factory=IlluminationSpec)
    blur_sigma: float = 0.0
    artifacts: ArtifactSpec = field(default_factory=ArtifactSpec)
    enabled: frozenset[str] = frozenset()

    def validate(self) -> None:
        unknown = set(self.enabled) - set(COMPOSITION_ORDER)
        if unknown:
            raise ValueError(f"unknown degradation stages: {sorted(unknown)}")
        if self.blur_sigma < 0:
            raise ValueError(f"blur_sigma must be >= 0, got {self.blur_sigma}")
        self.illumination.validate()
        self.artifacts.validate()

    def to_json(self) -> str:
        return json.dumps(
            {
                "illumination": {
                    "gradient_strength": self.illumination.gradient_strength,
                    "center": list(self.illumination.center),
                    "radial_falloff": self.illumination.radial_falloff,
                },
                "blur_sigma": self.blur_sigma,
                "artifacts": {
                    "count": self.artifacts.count,
                    "radius_range": list(self.artifacts.radius_range),
                    "intensity_range": list(self.artifacts.intensity_range),
                },
                "enabled": sorted(self.enabled),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "DegradationSpec":
        d = json.loads(text)
        illum = d.get("illumination", {})
        art = d.get("artifacts", {})
        spec = cls(
            illumination=IlluminationSpec(
                gradient_strength=illum.get("gradient_strength", 0.5),
                center=tuple(illum.get("center", (0.5, 0.5))),
                radial_falloff=illum.get("radial_falloff", 1.5),
            ),
            blur_sigma=d.get("blur_sigma", 0.0),
            artifacts=ArtifactSpec(
                count=art.get("count", 0),
                radius_range=tuple(art.get("radius_range", (8.0, 24.0))),
                intensity_range=tuple(art.get("intensity_range", (-0.3, 0.3))),
            ),
            enabled=frozenset(d.get("enabled", [])),
        )
        spec.validate()
        return spec


@dataclass
class PairedSample:
    clean: ImageRecord
    degraded: ImageRecord
    spec: DegradationSpec
    seed: int


def illumination_mask(height: int, width: int, spec: IlluminationSpec) -> np.ndarray:
    """Smooth multiplicative mask in [1 - strength, 1], radial around center."""
    cy = spec.center[1] * (height - 1)
    cx = spec.center[0] * (width - 1)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    dist = np.hypot(ys - cy, xs - cx)
    corners = [(0.0, 0.0), (0.0, width - 1.0), (height - 1.0, 0.0), (height - 1.0, width - 1.0)]
    d_max = max(np.hypot(r - cy, c - cx) for r, c in corners)
    if d_max == 0:
        return np.ones((height, width), dtype=np.float64)
    return 1.0 - spec.gradient_strength * (dist / d_max) ** spec.radial_falloff


def apply_illumination(image: ImageRecord, spec: IlluminationSpec, seed: int = 0) -> ImageRecord:
    spec.validate()
    mask = illumination_mask(image.pixels.shape[0], image.pixels.shape[1], spec)
    out = np.clip(image.pixels.astype(np.float64) * mask[:, :, None], 0.0, 1.0)
    return ImageRecord(pixels=out.astype(np.float32), source_path=image.source_path)


def apply_blur(image: ImageRecord, sigma: float) -> ImageRecord:
    if sigma < 0:
        raise ValueError(f"blur sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return ImageRecord(pixels=image.pixels.copy(), source_path=image.source_path)
    out = kernels.gaussian_blur(image.pixels.astype(np.float64), sigma)
    return ImageRecord(
        pixels=np.clip(out, 0.0, 1.0).astype(np.float32), source_path=image.source_path
    )


def apply_artifacts(image: ImageRecord, spec: ArtifactSpec, seed: int = 0) -> ImageRecord:
    spec.validate()
    out = image.pixels.astype(np.float64)
    h, w = out.shape[:2]
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    for _ in range(spec.count):
        cy = rng.uniform(0, h - 1)
        cx = rng.uniform(0, w - 1)
        radius = rng.uniform(*spec.radius_range)
        intensity = rng.uniform(*spec.intensity_range)
        # soft edge: full strength inside 70% of the radius, linear ramp to 0
        dist = np.hypot(ys - cy, xs - cx)
        edge = max(0.3 * radius, 1e-9)
        weight = np.clip((radius - dist) / edge, 0.0, 1.0)
        out += intensity * weight[:, :, None]
    return ImageRecord(
        pixels=np.clip(out, 0.0, 1.0).astype(np.float32), source_path=image.source_path
    )


def degrade(image: ImageRecord, spec: DegradationSpec, seed: int = 0) -> PairedSample:
    """Compose the enabled stages in the fixed order illum -> blur -> artifact."""
    spec.validate()
    current = ImageRecord(pixels=image.pixels.copy(), source_path=image.source_path)
    if "illum" in spec.enabled:
        current = apply_illumination(current, spec.illumination, seed)
    if "blur" in spec.enabled:
        current = apply_blur(current, spec.blur_sigma)
    if "artifact" in spec.enabled:
        current = apply_artifacts(current, spec.artifacts, seed)
    return PairedSample(clean=image, degraded=current, spec=spec, seed=seed)
