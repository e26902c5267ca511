"""Pure numpy versions of the compiled kernels in ``_core.pyx``.

Same contracts, same argument layout. Used when the extension is not built or
when ``REVEULER_BACKEND=python`` is set.
"""
import numpy as np


def _toeplitz(w, n):
    m = (len(w) - 1) // 2
    idx = np.arange(n)
    off = idx[:, None] - idx[None, :]
    mat = np.zeros((n, n))
    mask = np.abs(off) <= m
    mat[mask] = w[off[mask] + m]
    return mat


def conv_last_axis(a, w):
    a = np.asarray(a, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    mat = _toeplitz(w, a.shape[1])
    return a @ mat.T


def conv_direct3(f, w):
    f = np.asarray(f, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n0, n1, n2 = f.shape
    ma, mb, mc = ((s - 1) // 2 for s in w.shape)
    out = np.zeros_like(f)
    for oa in range(-ma, ma + 1):
        if abs(oa) >= n0:
            continue
        for ob in range(-mb, mb + 1):
            if abs(ob) >= n1:
                continue
            for oc in range(-mc, mc + 1):
                if abs(oc) >= n2:
                    continue
                weight = w[oa + ma, ob + mb, oc + mc]
                if weight == 0.0:
                    continue
                dst = (
                    slice(max(oa, 0), n0 + min(oa, 0)),
                    slice(max(ob, 0), n1 + min(ob, 0)),
                    slice(max(oc, 0), n2 + min(oc, 0)),
                )
                src = (
                    slice(max(-oa, 0), n0 + min(-oa, 0)),
                    slice(max(-ob, 0), n1 + min(-ob, 0)),
                    slice(max(-oc, 0), n2 + min(-oc, 0)),
                )
                out[dst] += weight * f[src]
    return out
