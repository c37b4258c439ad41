"""NumPy fallback for the separable blur kernel.

Border handling is symmetric reflection including the edge pixel
(np.pad mode="symmetric"), matching the compiled version exactly.
"""

import numpy as np


def sep_convolve_2d(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = _convolve_axis(plane, kernel, axis=0)
    return _convolve_axis(out, kernel, axis=1)


def _convolve_axis(a: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    r = len(kernel) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (r, r)
    ap = np.pad(a, pad, mode="symmetric")
    out = np.zeros_like(a)
    n = a.shape[axis]
    sl = [slice(None), slice(None)]
    for i, w in enumerate(kernel):
        sl[axis] = slice(i, i + n)
        out += w * ap[tuple(sl)]
    return out
