"""Hot image-space kernels: compiled extension when available, NumPy otherwise.

Set PATCHENHANCE_PURE=1 to force the NumPy path (used by the benchmark
and to debug the compiled kernel).
"""

import os

import numpy as np

from ._common import gaussian_kernel_1d

if os.environ.get("PATCHENHANCE_PURE"):
    from ._blur_np import sep_convolve_2d

    BACKEND = "numpy"
else:
    try:
        from ._blur_cy import sep_convolve_2d

        BACKEND = "cython"
    except ImportError:
        from ._blur_np import sep_convolve_2d

        BACKEND = "numpy"

__all__ = ["BACKEND", "gaussian_blur", "gaussian_kernel_1d", "sep_convolve_2d"]


def gaussian_blur(image: np.ndarray, sigma: float, radius: int | None = None) -> np.ndarray:
    """Gaussian blur with reflected borders on an HxW or HxWxC array.

    sigma=0 is the identity. Computation is float64; the result keeps
    the input dtype.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return image.copy()
    kernel = gaussian_kernel_1d(sigma, radius)
    src = np.asarray(image, dtype=np.float64)
    if src.ndim == 2:
        out = sep_convolve_2d(src, kernel)
    elif src.ndim == 3:
        out = np.stack(
            [sep_convolve_2d(np.ascontiguousarray(src[..., c]), kernel) for c in range(src.shape[2])],
            axis=-1,
        )
    else:
        raise ValueError(f"expected 2-D or 3-D image, got ndim={image.ndim}")
    return out.astype(image.dtype, copy=False)
