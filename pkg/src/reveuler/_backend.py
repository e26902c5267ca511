"""Pick the compiled convolution core if it is importable, else the numpy fallback.

Set ``REVEULER_BACKEND=python`` to force the fallback (used by the benchmark
and by the backend-equivalence tests).
"""
import os

import numpy as np

from . import _fallback

_compiled = None
if os.environ.get("REVEULER_BACKEND", "").lower() != "python":
    try:
        from . import _core as _compiled
    except ImportError:
        _compiled = None

NAME = "compiled" if _compiled is not None else "python"


def _impl(backend):
    if backend is None:
        return _compiled if _compiled is not None else _fallback
    if backend == "python":
        return _fallback
    if backend == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled core not available; build with `pip install -e .`")
        return _compiled
    raise ValueError(f"unknown backend {backend!r}")


def available():
    return ["python"] + (["compiled"] if _compiled is not None else [])


def conv_axis(a, w, axis, backend=None):
    """Zero-padded 1-D convolution of ``a`` along ``axis`` with centred weights ``w``."""
    a = np.asarray(a, dtype=np.float64)
    moved = np.moveaxis(a, axis, -1)
    shape = moved.shape
    flat = np.ascontiguousarray(moved.reshape(-1, shape[-1]))
    out = np.asarray(_impl(backend).conv_last_axis(flat, np.ascontiguousarray(w, dtype=np.float64)))
    return np.moveaxis(out.reshape(shape), -1, axis)


def conv_direct3(f, w, backend=None):
    """Direct 3-D convolution of ``f`` with the centred kernel table ``w``."""
    f = np.ascontiguousarray(f, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    return np.asarray(_impl(backend).conv_direct3(f, w))
