"""Independent loop-based metric implementations used to cross-check
the vectorized PSNR/SSIM. Kept deliberately literal: per-pixel loops,
explicit window weights, explicit reflection. Numba-compiled so the
100-pair acceptance check stays fast."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _reflect(i, n):
    while i < 0 or i >= n:
        if i < 0:
            i = -i - 1
        else:
            i = 2 * n - 1 - i
    return i


@njit(cache=True)
def psnr_oracle(a, b):
    h, w, c = a.shape
    acc = 0.0
    for y in range(h):
        for x in range(w):
            for ch in range(c):
                d = a[y, x, ch] - b[y, x, ch]
                acc += d * d
    mse = acc / (h * w * c)
    if mse == 0.0:
        return 99.0
    val = 10.0 * math.log10(1.0 / mse)
    return min(val, 99.0)


@njit(cache=True)
def _ssim_plane(pa, pb, weights, radius, c1, c2):
    h, w = pa.shape
    total = 0.0
    for y in range(h):
        for x in range(w):
            mu_a = 0.0
            mu_b = 0.0
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    wgt = weights[dy + radius, dx + radius]
                    va = pa[_reflect(y + dy, h), _reflect(x + dx, w)]
                    vb = pb[_reflect(y + dy, h), _reflect(x + dx, w)]
                    mu_a += wgt * va
                    mu_b += wgt * vb
            var_a = 0.0
            var_b = 0.0
            cov = 0.0
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    wgt = weights[dy + radius, dx + radius]
                    va = pa[_reflect(y + dy, h), _reflect(x + dx, w)]
                    vb = pb[_reflect(y + dy, h), _reflect(x + dx, w)]
                    var_a += wgt * va * va
                    var_b += wgt * vb * vb
                    cov += wgt * va * vb
            var_a -= mu_a * mu_a
            var_b -= mu_b * mu_b
            cov -= mu_a * mu_b
            num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
            den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
            total += num / den
    return total / (h * w)


def ssim_oracle(a, b, window=11, sigma=1.5, k1=0.01, k2=0.03):
    radius = window // 2
    weights = np.empty((window, window), dtype=np.float64)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            weights[dy + radius, dx + radius] = math.exp(-(dy * dy + dx * dx) / (2.0 * sigma**2))
    weights /= weights.sum()
    vals = []
    for c in range(a.shape[2]):
        vals.append(
            _ssim_plane(
                np.ascontiguousarray(a[:, :, c], dtype=np.float64),
                np.ascontiguousarray(b[:, :, c], dtype=np.float64),
                weights,
                radius,
                k1 * k1,
                k2 * k2,
            )
        )
    return float(np.mean(np.array(vals)))
