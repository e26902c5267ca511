"""Grid convolutions with the heat kernel, Duhamel time integrals, and the Leray term.

Heat-kernel weights are the sampled Gaussian (or its first derivative) on the
grid offsets, normalised so the discrete kernel reproduces constants (order 0)
or the slope of linear data (order 1) exactly.  For nu*t well above h^2 the
normalisation changes nothing measurable; for nu*t -> 0 it makes the kernels
tend to the identity and to the centred difference instead of to garbage.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as sfft
from scipy import integrate, signal
from scipy.special import erf

from . import _backend
from .fields import Grid, ScalarField3, VectorField3, gradient
from .kernels import FOUR_PI, gauss_1d

FAST = "fast"
DIRECT = "direct"


class KernelOverflowsDomain(UserWarning):
    """The heat kernel carries non-negligible mass outside the computational box."""


class InsufficientSlices(ValueError):
    """A Duhamel integral was requested at a time the slab does not cover."""


def _path(path: str) -> str:
    p = str(path).lower()
    if p in ("fast", "fastseparable", "fast_separable"):
        return FAST
    if p in ("direct", "directquadrature", "direct_quadrature"):
        return DIRECT
    raise ValueError(f"unknown convolution path {path!r}")


@lru_cache(maxsize=4096)
def heat_weights(h: float, n: int, nu_t: float, order: int) -> np.ndarray:
    """Centred 1-D weights for convolution with d^order/dx^order of the 1-D heat factor.

    Length 2m+1 with m = min(n-1, support); the kernel is normalised on its
    full support before truncation to the grid, so truncation shows up as lost
    mass rather than being renormalised away.
    """
    if order not in (0, 1):
        raise ValueError("kernel-side derivatives limited to order <= 1")
    s = float(nu_t)
    if s <= 0:
        raise ValueError("nu*t must be positive")
    sigma = np.sqrt(2.0 * s)
    m_full = int(np.ceil(10.0 * sigma / h)) + 2
    o = np.arange(-m_full, m_full + 1, dtype=float)
    # scaled so the largest entry is O(1) even when h^2 >> nu t
    if order == 0:
        w = np.exp(-(o * o) * h * h / (4.0 * s))
        w /= w.sum()
    else:
        w = -o * np.exp(-(o * o - 1.0) * h * h / (4.0 * s))
        w /= -h * np.sum(o * w)
    m = min(n - 1, m_full)
    return w[m_full - m : m_full + m + 1].copy()


def tail_mass(extent: float, nu_t: float) -> float:
    """Heat-kernel mass outside a cube of half-width extent/2 around its centre."""
    return float(1.0 - erf(0.5 * extent / (2.0 * np.sqrt(nu_t))) ** 3)


def _warn_overflow(grid: Grid, nu_t: float):
    tm = tail_mass(grid.extent, nu_t)
    if tm > 1e-4:
        warnings.warn(
            f"heat kernel with nu*t={nu_t:.3g} leaves mass {tm:.2e} outside R/2={grid.extent / 2:g}",
            KernelOverflowsDomain,
            stacklevel=3,
        )


def conv_array(
    values: np.ndarray,
    grid: Grid,
    nu: float,
    t: float,
    gamma=(0, 0, 0),
    path: str = FAST,
    backend: str | None = None,
    warn: bool = True,
) -> np.ndarray:
    """(f *_sp D^gamma G_nu(t)) for an array with the three spatial axes last."""
    gamma = tuple(int(g) for g in gamma)
    if sum(gamma) > 1:
        raise ValueError("|gamma| <= 1 on the kernel side; take further derivatives with fd")
    nu_t = nu * t
    if warn:
        _warn_overflow(grid, nu_t)
    ws = [heat_weights(grid.h, grid.n, nu_t, g) for g in gamma]
    values = np.asarray(values, dtype=np.float64)
    if _path(path) == FAST:
        out = values
        for ax, w in enumerate(ws):
            out = _backend.conv_axis(out, w, ax - 3, backend)
        return out
    table = ws[0][:, None, None] * ws[1][None, :, None] * ws[2][None, None, :]
    flat = values.reshape((-1,) + grid.shape)
    res = np.stack([_backend.conv_direct3(c, table, backend) for c in flat])
    return res.reshape(values.shape)


def conv_spatial(f, nu: float, t: float, gamma=(0, 0, 0), path: str = FAST, backend=None):
    """Spatial convolution of a sampled field with D^gamma G_nu(t, .), |gamma| <= 1."""
    vals = conv_array(f.values, f.grid, nu, t, gamma, path, backend)
    return type(f)(f.grid, vals, f.boundary_layer)


# ---------------------------------------------------------------------------
# space-time (Duhamel) convolution


@dataclass
class TimeSlab:
    """Time-indexed samples of a field: ``values[l]`` holds the field at ``times[l]``."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or len(self.times) < 2:
            raise ValueError("a time slab needs at least two slices")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("slab times must be strictly increasing")
        if self.times[0] < 0:
            raise ValueError("slab must start at t >= 0")
        if self.values.shape[0] != len(self.times) or self.values.shape[-3:] != self.grid.shape:
            raise ValueError("slab values do not match times/grid")

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    def index_of(self, t: float) -> int:
        j = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[j] - t) > 1e-9 * max(1.0, abs(t)):
            raise InsufficientSlices(f"t={t} is not a slice time of the slab")
        return j

    def slice(self, j: int):
        vals = self.values[j]
        if vals.ndim == 4:
            return VectorField3(self.grid, vals)
        return ScalarField3(self.grid, vals)

    @classmethod
    def constant(cls, f, times) -> "TimeSlab":
        times = np.asarray(times, dtype=float)
        return cls(f.grid, times, np.broadcast_to(f.values, (len(times),) + f.values.shape).copy())


def duhamel_weights(times: np.ndarray, j: int, singular: bool) -> np.ndarray:
    """Quadrature weights over slices 0..j for an integral ending at times[j].

    Trapezoid throughout; with ``singular`` the last subinterval is integrated
    against an (t - s)^(-1/2) profile pinned at s = times[j-1], which gives
    the weight 2*dt on that slice and none on the endpoint.
    """
    w = np.zeros(j + 1)
    if j == 0:
        return w
    dts = np.diff(times[: j + 1])
    if not singular:
        w[:-1] += 0.5 * dts
        w[1:] += 0.5 * dts
        return w
    if j >= 2:
        w[: j - 1] += 0.5 * dts[: j - 1]
        w[1:j] += 0.5 * dts[: j - 1]
    w[j - 1] += 2.0 * dts[-1]
    return w


def conv_spacetime_array(
    slab: TimeSlab,
    nu: float,
    t_eval: float,
    gamma=(0, 0, 0),
    path: str = FAST,
    backend=None,
    warn: bool = True,
) -> np.ndarray:
    """int_{t0}^{t_eval} slice(s) *_sp D^gamma G_nu(t_eval - s) ds, as an array."""
    gamma = tuple(int(g) for g in gamma)
    j = slab.index_of(t_eval)
    if j == 0:
        raise InsufficientSlices("t_eval must lie strictly after the first slice")
    singular = sum(gamma) > 0
    w = duhamel_weights(slab.times, j, singular)
    out = np.zeros(slab.values.shape[1:])
    # fixed summation order: ascending slice index
    for l in range(j + 1):
        if w[l] == 0.0:
            continue
        lag = slab.times[j] - slab.times[l]
        if lag <= 0.0:
            term = slab.values[l]
        else:
            term = conv_array(slab.values[l], slab.grid, nu, lag, gamma, path, backend, warn)
        out = out + w[l] * term
    return out


def conv_spacetime(slab: TimeSlab, nu: float, t_eval: float, gamma=(0, 0, 0), path: str = FAST, backend=None):
    vals = conv_spacetime_array(slab, nu, t_eval, gamma, path, backend)
    if vals.ndim == 4:
        return VectorField3(slab.grid, vals)
    return ScalarField3(slab.grid, vals)


# ---------------------------------------------------------------------------
# Leray term via the Newtonian kernel


@lru_cache(maxsize=16)
def _grad_newton_table(h: float, n: int) -> np.ndarray:
    # grad K on all offsets -(n-1)..(n-1), times the cell volume; self cell is 0
    o = np.arange(-(n - 1), n) * h
    z1, z2, z3 = np.meshgrid(o, o, o, indexing="ij")
    r = np.sqrt(z1 * z1 + z2 * z2 + z3 * z3)
    r[n - 1, n - 1, n - 1] = 1.0
    scale = h**3 / (FOUR_PI * r**3)
    scale[n - 1, n - 1, n - 1] = 0.0
    return np.stack([z1 * scale, z2 * scale, z3 * scale])


def leray_source_array(v: np.ndarray, h: float) -> np.ndarray:
    """S = sum_{j,m} (d_j v_m)(d_m v_j)."""
    grads = np.stack([gradient(v[m], h) for m in range(3)])  # grads[m, j] = d_j v_m
    return np.einsum("mj...,jm...->...", grads, grads)


# Regularised lattice sum over Z^3 minus the origin of 1/|m|.  Dropping the
# self cell from the point rule for K * S leaves an error of -h^2 Z S / (4 pi)
# at leading order; for grad K the same holds with S replaced by grad S.
LATTICE_ZETA = -2.8372974794806196


def newton_gradient_array(
    source: np.ndarray, grid: Grid, method: str = "fft", backend=None, corrected: bool = False
) -> np.ndarray:
    """Quadrature of int grad K(x - y) S(y) dy over the grid, i.e. grad of Delta^{-1} S.

    ``fft`` evaluates the discrete sum by zero-padded FFT convolution;
    ``direct`` runs the same sum through the direct-convolution core.  With
    ``corrected`` the self-cell term h^2 Z grad S / (12 pi) is added, lifting
    the point rule from second to fourth order on smooth sources.
    """
    out = _newton_sum(source, grid, method, backend)
    if corrected:
        out += (grid.h**2 * LATTICE_ZETA / (3.0 * FOUR_PI)) * gradient(source, grid.h)
    return out


def _newton_sum(source, grid, method, backend):
    table = _grad_newton_table(grid.h, grid.n)
    n = grid.n
    if method == "fft":
        out = np.empty((3,) + grid.shape)
        for i in range(3):
            full = signal.fftconvolve(source, table[i], mode="full")
            out[i] = full[n - 1 : 2 * n - 1, n - 1 : 2 * n - 1, n - 1 : 2 * n - 1]
        return out
    if method == "direct":
        return np.stack([_backend.conv_direct3(source, table[i], backend) for i in range(3)])
    raise ValueError(f"unknown method {method!r}")


def leray_term_array(v: np.ndarray, grid: Grid, method: str = "fft", backend=None) -> np.ndarray:
    return newton_gradient_array(leray_source_array(v, grid.h), grid, method, backend)


def leray_term(v: VectorField3, method: str = "fft") -> VectorField3:
    """Component i: int d_i K(x - y) sum_{j,m} v_{m,j} v_{j,m}(y) dy."""
    return VectorField3(v.grid, leray_term_array(v.values, v.grid, method), v.boundary_layer + 1)


def poisson_gradient_oracle(source: np.ndarray, grid: Grid, pad: int = 2) -> np.ndarray:
    """grad Delta^{-1} S by a periodic spectral solve on a zero-padded super-domain.

    Independent check of ``newton_gradient_array``; never used on the primary path.
    """
    n = grid.n
    big = pad * n
    src = np.zeros((big, big, big))
    src[:n, :n, :n] = source
    k1 = 2.0 * np.pi * sfft.fftfreq(big, d=grid.h)
    k3 = 2.0 * np.pi * sfft.rfftfreq(big, d=grid.h)
    kx, ky, kz = k1[:, None, None], k1[None, :, None], k3[None, None, :]
    ksq = kx * kx + ky * ky + kz * kz
    ksq[0, 0, 0] = 1.0
    phi_hat = -sfft.rfftn(src) / ksq
    phi_hat[0, 0, 0] = 0.0
    out = np.empty((3,) + grid.shape)
    for i, k in enumerate((kx, ky, kz)):
        kk = np.broadcast_to(k, phi_hat.shape).copy()
        if big % 2 == 0:
            # drop Nyquist modes so the derivative stays real
            if i < 2:
                idx = [slice(None)] * 3
                idx[i] = big // 2
                kk[tuple(idx)] = 0.0
            else:
                kk[..., -1] = 0.0
        comp = sfft.irfftn(1j * kk * phi_hat, s=(big, big, big))
        out[i] = comp[:n, :n, :n]
    return out


def leray_project_array(w: np.ndarray, grid: Grid) -> np.ndarray:
    """w - grad Delta^{-1} div w, with the periodic spectral projector on the box."""
    n = grid.n
    k1 = 2.0 * np.pi * sfft.fftfreq(n, d=grid.h)
    k3 = 2.0 * np.pi * sfft.rfftfreq(n, d=grid.h)
    ks = (k1[:, None, None], k1[None, :, None], k3[None, None, :])
    ksq = ks[0] ** 2 + ks[1] ** 2 + ks[2] ** 2
    ksq[0, 0, 0] = 1.0
    what = [sfft.rfftn(w[i]) for i in range(3)]
    kdotw = sum(ks[i] * what[i] for i in range(3)) / ksq
    kdotw[0, 0, 0] = 0.0
    return np.stack([sfft.irfftn(what[i] - ks[i] * kdotw, s=grid.shape) for i in range(3)])


def leray_project(w: VectorField3) -> VectorField3:
    return VectorField3(w.grid, leray_project_array(w.values, w.grid), w.boundary_layer)


# ---------------------------------------------------------------------------
# Gaussian second moment


def second_moment(nu: float, t: float, axis: int = 0) -> float:
    """int_0^t int_{y_i >= 0} (4 y_i^2 / (4 nu s)) G_nu(s, y) dy ds.

    The transverse axes integrate to one, so the inner integral is one-dimensional.
    """
    if not (nu > 0 and t > 0):
        raise ValueError("second moment needs nu*t > 0")
    if axis not in (0, 1, 2):
        raise ValueError("axis must be 0, 1 or 2")

    def inner(s):
        if s <= 0:
            return 0.0
        scale = np.sqrt(nu * s)
        val, _ = integrate.quad(lambda y: y * y / (nu * s) * gauss_1d(y, nu, s), 0.0, 40.0 * scale, epsabs=0, epsrel=1e-12, limit=200)
        return val

    total, _ = integrate.quad(inner, 0.0, t, epsabs=0, epsrel=1e-10, limit=200)
    return float(total)
