# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for grid convolutions.

Summation order is fixed (kernel offsets in ascending order) so results are
bit-reproducible run to run.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()


def conv_last_axis(const double[:, ::1] a, const double[::1] w):
    """Zero-padded convolution of each row of ``a`` with the centred weights ``w``.

    out[r, i] = sum_o w[o + m] * a[r, i - o] for |o| <= m, i - o in range.
    """
    cdef Py_ssize_t rows = a.shape[0]
    cdef Py_ssize_t n = a.shape[1]
    cdef Py_ssize_t m = (w.shape[0] - 1) // 2
    cdef Py_ssize_t r, i, o, lo, hi
    cdef double acc
    out = np.empty((rows, n), dtype=np.float64)
    cdef double[:, ::1] res = out
    for r in range(rows):
        for i in range(n):
            lo = i - n + 1
            if lo < -m:
                lo = -m
            hi = i
            if hi > m:
                hi = m
            acc = 0.0
            for o in range(lo, hi + 1):
                acc = acc + w[o + m] * a[r, i - o]
            res[r, i] = acc
    return out


def conv_direct3(const double[:, :, ::1] f, const double[:, :, ::1] w):
    """Full 3-D zero-padded convolution with a centred kernel table.

    out[i, j, k] = sum_{a, b, c} w[a, b, c] * f[i - a + ma, j - b + mb, k - c + mc]
    """
    cdef Py_ssize_t n0 = f.shape[0], n1 = f.shape[1], n2 = f.shape[2]
    cdef Py_ssize_t ma = (w.shape[0] - 1) // 2
    cdef Py_ssize_t mb = (w.shape[1] - 1) // 2
    cdef Py_ssize_t mc = (w.shape[2] - 1) // 2
    cdef Py_ssize_t i, j, k, oa, ob, oc
    cdef Py_ssize_t alo, ahi, blo, bhi, clo, chi
    cdef double acc
    out = np.empty((n0, n1, n2), dtype=np.float64)
    cdef double[:, :, ::1] res = out
    for i in range(n0):
        alo = max(-ma, i - n0 + 1)
        ahi = min(ma, i)
        for j in range(n1):
            blo = max(-mb, j - n1 + 1)
            bhi = min(mb, j)
            for k in range(n2):
                clo = max(-mc, k - n2 + 1)
                chi = min(mc, k)
                acc = 0.0
                for oa in range(alo, ahi + 1):
                    for ob in range(blo, bhi + 1):
                        for oc in range(clo, chi + 1):
                            acc = acc + w[oa + ma, ob + mb, oc + mc] * f[i - oa, j - ob, k - oc]
                res[i, j, k] = acc
    return out
