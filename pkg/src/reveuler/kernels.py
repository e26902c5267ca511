"""Closed-form kernels: heat Gaussian and derivatives, Biot-Savart, Newtonian potential.

Sign convention for the Newtonian potential: Laplacian of K is the Dirac
delta, so K(x) = -1/(4 pi |x|) and grad K(x) = x / (4 pi |x|^3).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import minimize_scalar

EPS_M = 1e-300
FOUR_PI = 4.0 * np.pi


class KernelDomainError(ValueError):
    """Kernel evaluated outside its domain (t <= 0, nu <= 0, or x at the singularity)."""


@dataclass(frozen=True)
class HeatKernelSpec:
    nu: float
    t: float
    gamma: tuple[int, int, int] = (0, 0, 0)

    def __post_init__(self):
        if not (self.nu > 0 and self.t > 0):
            raise KernelDomainError(f"heat kernel needs nu > 0 and t > 0, got nu={self.nu}, t={self.t}")
        g = tuple(int(x) for x in self.gamma)
        if len(g) != 3 or min(g) < 0 or sum(g) > 2:
            raise KernelDomainError(f"|gamma| must be <= 2, got {self.gamma}")
        object.__setattr__(self, "gamma", g)

    @property
    def variance(self) -> float:
        """Per-axis variance 2 nu t."""
        return 2.0 * self.nu * self.t


@lru_cache(maxsize=None)
def _hermite_1d(order: int) -> tuple[np.ndarray, ...]:
    # d^a/dx^a exp(-x^2/(4s)) = p_a(x, 1/s) exp(-x^2/(4s)); store p_a as
    # coefficients in x for each power of c = 1/(2s):  p_{a+1} = -c x p_a + p_a'
    # Represent p_a as dict power_of_c -> poly in x.
    polys = [{0: np.array([1.0])}]
    for _ in range(order):
        prev = polys[-1]
        nxt: dict[int, np.ndarray] = {}
        for pc, coef in prev.items():
            shifted = -P.polymulx(coef)
            nxt[pc + 1] = P.polyadd(nxt.get(pc + 1, np.zeros(1)), shifted)
            der = P.polyder(coef)
            if der.size:
                nxt[pc] = P.polyadd(nxt.get(pc, np.zeros(1)), der)
        polys.append(nxt)
    return tuple(polys)


@dataclass(frozen=True)
class HermiteFactor:
    """Polynomial factor H with D^gamma G = H(x) G for the heat kernel at variance 2*nu_t."""

    gamma: tuple[int, int, int]
    nu_t: float

    @property
    def degree(self) -> int:
        return sum(self.gamma)

    def axis_coefficients(self, axis: int) -> np.ndarray:
        """Coefficients in x_axis (ascending powers) of the per-axis factor."""
        c = 1.0 / (2.0 * self.nu_t)
        out = np.zeros(1)
        for pc, coef in _hermite_1d(self.gamma[axis])[-1].items():
            out = P.polyadd(out, coef * c**pc)
        return out

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        val = 1.0
        for ax in range(3):
            val = val * P.polyval(x[..., ax], self.axis_coefficients(ax))
        return val


def gauss_1d(x, nu: float, t: float, order: int = 0) -> np.ndarray:
    """One-axis factor of D^gamma G: (4 pi nu t)^(-1/2) exp(-x^2/(4 nu t)) times its Hermite factor."""
    x = np.asarray(x, dtype=float)
    s = nu * t
    base = np.exp(-x * x / (4.0 * s)) / np.sqrt(4.0 * np.pi * s)
    if order == 0:
        return base
    coef = HermiteFactor((order, 0, 0), s).axis_coefficients(0)
    return P.polyval(x, coef) * base


def gauss_eval(spec: HeatKernelSpec, x) -> np.ndarray:
    """D^gamma G_nu(t, x) for points ``x`` with trailing dimension 3."""
    x = np.asarray(x, dtype=float)
    out = 1.0
    for ax in range(3):
        out = out * gauss_1d(x[..., ax], spec.nu, spec.t, spec.gamma[ax])
    return out


def gauss_antisymmetry_pair(spec: HeatKernelSpec, x) -> tuple[np.ndarray, np.ndarray]:
    """Values at x and at x with coordinate i flipped, for a first-derivative kernel along i."""
    if sum(spec.gamma) != 1:
        raise KernelDomainError("antisymmetry pair needs |gamma| = 1")
    i = spec.gamma.index(1)
    x = np.asarray(x, dtype=float)
    xm = x.copy()
    xm[..., i] = -xm[..., i]
    return gauss_eval(spec, x), gauss_eval(spec, xm)


def _golden_max(fun, lo: float, hi: float, tol: float = 1e-10) -> tuple[float, float]:
    res = minimize_scalar(lambda z: -fun(z), bounds=(lo, hi), method="bounded", options={"xatol": tol})
    return float(res.x), float(-res.fun)


@lru_cache(maxsize=None)
def gauss_bound_constant(order: int, delta: float | None = None) -> float:
    """C_0 / C_1: sup over z > 0 of z^(3/2 + order - delta) exp(-z^2/4).

    With ``delta=None`` the supremum is also taken over delta in (0, 1); the
    z-maximum is decreasing in delta there, so it is the delta -> 0 value.
    """
    if order not in (0, 1):
        raise ValueError("constants defined for |gamma| in {0, 1}")
    d = 0.0 if delta is None else float(delta)
    if not 0.0 <= d < 1.0 + 1e-12:
        raise ValueError("delta must lie in (0, 1)")
    p = 1.5 + order - d
    _, val = _golden_max(lambda z: z**p * np.exp(-z * z / 4.0), 1e-8, 50.0)
    return val


def gauss_derivative_bound(gamma, delta: float, nu: float, t: float, r) -> np.ndarray:
    """Pointwise majorant C_|gamma| / (nu^delta t^delta r^(3 + |gamma| - 2 delta))."""
    order = sum(gamma)
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise KernelDomainError("bound undefined at r = 0")
    c = gauss_bound_constant(order, float(delta))
    return c / (nu**delta * t**delta * r ** (3 + order - 2 * delta))


def _check_point(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(np.linalg.norm(x, axis=-1) < 1e3 * np.finfo(float).tiny):
        raise KernelDomainError("kernel evaluated at the origin")
    return x


def biot_savart_apply(x, h) -> np.ndarray:
    """K_3(x) h = (x cross h) / (4 pi |x|^3)."""
    x = _check_point(x)
    h = np.asarray(h, dtype=float)
    r = np.linalg.norm(x, axis=-1)[..., None]
    return np.cross(x, h) / (FOUR_PI * r**3)


def newtonian_kernel(x, order: str = "0"):
    """K(x) = -1/(4 pi |x|); ``order`` in {"0", "grad", "hess"}."""
    x = _check_point(x)
    r = np.linalg.norm(x, axis=-1)
    if order in ("0", 0):
        return -1.0 / (FOUR_PI * r)
    if order == "grad":
        return x / (FOUR_PI * r[..., None] ** 3)
    if order == "hess":
        eye = np.eye(3)
        outer = x[..., :, None] * x[..., None, :]
        r2 = (r * r)[..., None, None]
        return (eye * r2 - 3.0 * outer) / (FOUR_PI * r[..., None, None] ** 5)
    raise ValueError(f"unknown order {order!r}")
