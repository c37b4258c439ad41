"""PSNR and SSIM over the [0,1] float pixel domain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .imagedata import ImageRecord

PSNR_CAP_DB = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass
class MetricRow:
    name: str
    psnr: float
    ssim: float


@dataclass
class MetricReport:
    rows: list[MetricRow]

    @property
    def n_images(self) -> int:
        return len(self.rows)

    @property
    def mean_psnr(self) -> float:
        return float(np.mean([r.psnr for r in self.rows]))

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([r.ssim for r in self.rows]))

    def write_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write("name,psnr,ssim\n")
            for r in self.rows:
                fh.write(f"{r.name},{r.psnr:.6f},{r.ssim:.6f}\n")
            fh.write(f"mean,{self.mean_psnr:.6f},{self.mean_ssim:.6f}\n")


def _as_array(img) -> np.ndarray:
    pixels = img.pixels if isinstance(img, ImageRecord) else img
    return np.asarray(pixels, dtype=np.float64)


def psnr(a, b) -> float:
    """10*log10(1/MSE) with MAX=1; identical images return the 99 dB cap."""
    xa, xb = _as_array(a), _as_array(b)
    if xa.shape != xb.shape:
        raise ValueError(f"shape mismatch: {xa.shape} vs {xb.shape}")
    mse = float(np.mean((xa - xb) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB)


def ssim(a, b) -> float:
    """Mean local SSIM, 11x11 Gaussian window sigma=1.5, K1=0.01 K2=0.03 L=1.

    Channels are scored independently and averaged.
    """
    xa, xb = _as_array(a), _as_array(b)
    if xa.shape != xb.shape:
        raise ValueError(f"shape mismatch: {xa.shape} vs {xb.shape}")
    if xa.ndim == 2:
        xa, xb = xa[:, :, None], xb[:, :, None]
    if min(xa.shape[0], xa.shape[1]) < SSIM_WINDOW:
        raise ValueError(f"image side smaller than SSIM window {SSIM_WINDOW}")
    radius = SSIM_WINDOW // 2
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    vals = []
    for c in range(xa.shape[2]):
        pa = np.ascontiguousarray(xa[:, :, c])
        pb = np.ascontiguousarray(xb[:, :, c])
        mu_a = kernels.gaussian_blur(pa, SSIM_SIGMA, radius)
        mu_b = kernels.gaussian_blur(pb, SSIM_SIGMA, radius)
        var_a = kernels.gaussian_blur(pa * pa, SSIM_SIGMA, radius) - mu_a * mu_a
        var_b = kernels.gaussian_blur(pb * pb, SSIM_SIGMA, radius) - mu_b * mu_b
        cov = kernels.gaussian_blur(pa * pb, SSIM_SIGMA, radius) - mu_a * mu_b
        num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
        den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
        vals.append(float(np.mean(num / den)))
    return float(np.mean(vals))
