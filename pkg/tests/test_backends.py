import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reveuler import _backend

HAS_COMPILED = "compiled" in _backend.available()
needs_compiled = pytest.mark.skipif(not HAS_COMPILED, reason="compiled core not built")


def brute_axis(a, w):
    m = len(w) // 2
    out = np.zeros_like(a)
    n = a.shape[-1]
    for i in range(n):
        for j in range(n):
            if abs(i - j) <= m:
                out[..., i] += w[i - j + m] * a[..., j]
    return out


@pytest.mark.parametrize("backend", _backend.available())
def test_conv_axis_matches_brute(backend):
    rng = np.random.default_rng(1)
    a = rng.standard_normal((4, 11))
    for width in (1, 5, 31):
        w = rng.standard_normal(width)
        got = _backend.conv_axis(a, w, -1, backend=backend)
        np.testing.assert_allclose(got, brute_axis(a, w), atol=1e-13)


@pytest.mark.parametrize("backend", _backend.available())
def test_conv_direct3_delta_kernel(backend):
    rng = np.random.default_rng(2)
    f = rng.standard_normal((5, 6, 7))
    w = np.zeros((3, 3, 3))
    w[1, 1, 1] = 1.0
    np.testing.assert_allclose(_backend.conv_direct3(f, w, backend=backend), f, atol=1e-15)


@needs_compiled
@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 12), st.integers(0, 6), st.integers(0, 2))
def test_backends_agree_axis(seed, n, m, axis):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n + 1, n + 2))
    w = rng.standard_normal(2 * m + 1)
    np.testing.assert_allclose(
        _backend.conv_axis(a, w, axis, backend="python"),
        _backend.conv_axis(a, w, axis, backend="compiled"),
        atol=1e-12,
    )


@needs_compiled
@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 8), st.integers(0, 3))
def test_backends_agree_direct(seed, n, m):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((n, n, n))
    w = rng.standard_normal((2 * m + 1,) * 3)
    np.testing.assert_allclose(
        _backend.conv_direct3(f, w, backend="python"),
        _backend.conv_direct3(f, w, backend="compiled"),
        atol=1e-11,
    )


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.conv_axis(np.zeros((2, 3)), np.ones(1), 0, backend="fortran")


def _selected(env_value):
    env = dict(os.environ)
    if env_value is None:
        env.pop("REVEULER_BACKEND", None)
    else:
        env["REVEULER_BACKEND"] = env_value
    code = "from reveuler import _backend; print(_backend.NAME)"
    return subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout.strip()


def test_env_forces_fallback():
    assert _selected("python") == "python"


@needs_compiled
def test_default_prefers_compiled():
    assert _selected(None) == "compiled"
