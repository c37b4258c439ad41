# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled separable convolution with symmetric-reflect borders."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t reflect(Py_ssize_t i, Py_ssize_t n) nogil:
    # symmetric reflection including the edge: -1 -> 0, n -> n-1
    while i < 0 or i >= n:
        if i < 0:
            i = -i - 1
        else:
            i = 2 * n - 1 - i
    return i


def sep_convolve_2d(cnp.ndarray[cnp.float64_t, ndim=2] plane,
                    cnp.ndarray[cnp.float64_t, ndim=1] kernel):
    cdef Py_ssize_t h = plane.shape[0]
    cdef Py_ssize_t w = plane.shape[1]
    cdef Py_ssize_t r = kernel.shape[0] // 2
    cdef cnp.ndarray[cnp.float64_t, ndim=2] tmp = np.empty((h, w), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] src = np.ascontiguousarray(plane)
    cdef double[:, ::1] mid = tmp
    cdef double[:, ::1] dst = out
    cdef double[::1] k = np.ascontiguousarray(kernel)
    cdef Py_ssize_t y, x, t
    cdef double acc

    with nogil:
        # vertical pass
        for y in range(h):
            for x in range(w):
                acc = 0.0
                for t in range(-r, r + 1):
                    acc += k[t + r] * src[reflect(y + t, h), x]
                mid[y, x] = acc
        # horizontal pass
        for y in range(h):
            for x in range(w):
                acc = 0.0
                for t in range(-r, r + 1):
                    acc += k[t + r] * mid[y, reflect(x + t, w)]
                dst[y, x] = acc
    return out
