"""Singular and kink-type initial data built from a radial profile.

The profile is g(r) = phi1(r) r^beta0 sin(r^-(1 + alpha0)), cut off smoothly
between r = 1 and r = 2.  One velocity component carries g; a divergence-free
completion is obtained by projecting g e_i0 (or the component is left alone
in the literal mode, with the divergence reported instead of enforced).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .convolution import leray_project_array
from .fields import Grid, VectorField3, curl

PROJECTED = "ProjectedDivFree"
LITERAL = "PaperLiteralSingleComponent"
COMPLETION_MODES = (PROJECTED, LITERAL)


class ParameterIntervalWarning(UserWarning):
    """Profile parameters outside the admissible interval."""


class FitFailure(RuntimeError):
    """Not enough sample points for an exponent fit."""


# ---------------------------------------------------------------------------
# cutoff


def _s(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def _s1(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    up = u[pos]
    out[pos] = np.exp(-1.0 / up) / (up * up)
    return out


def _s2(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    up = u[pos]
    out[pos] = np.exp(-1.0 / up) * (1.0 / up**4 - 2.0 / up**3)
    return out


def cutoff_phi1(r, deriv: int = 0):
    """Smooth cutoff: 1 on [0, 1], 0 on [2, inf), exp-smoothstep bridge in between."""
    r = np.asarray(r, dtype=float)
    q, p = _s(2.0 - r), _s(r - 1.0)
    den = q + p
    safe = np.where(den > 0, den, 1.0)
    if deriv == 0:
        return np.where(r <= 1.0, 1.0, np.where(r >= 2.0, 0.0, q / safe))
    q1, p1 = -_s1(2.0 - r), _s1(r - 1.0)
    num = q1 * p - q * p1
    if deriv == 1:
        val = num / safe**2
    elif deriv == 2:
        q2, p2 = _s2(2.0 - r), _s2(r - 1.0)
        dnum = q2 * p - q * p2
        dden = 2.0 * den * (q1 + p1)
        val = (dnum * safe**2 - num * dden) / safe**4
    else:
        raise ValueError("cutoff derivatives implemented up to order 2")
    return np.where((r <= 1.0) | (r >= 2.0), 0.0, val)


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class ProfileParams:
    k: int = 0
    alpha0: float = 0.25
    beta0: float = 2.2

    def __post_init__(self):
        if self.k < 0 or self.k == 1:
            raise ValueError("kink order selector k must be 0 or >= 2")
        if not 0.0 < self.alpha0 < 0.5:
            warnings.warn(f"alpha0={self.alpha0} outside (0, 1/2)", ParameterIntervalWarning, stacklevel=3)
        lo = 2.0 if self.k == 0 else self.k + 1.0
        # the Lipschitz endpoint beta0 = lo + alpha0 is admitted
        if not lo < self.beta0 <= lo + self.alpha0 + 1e-12:
            warnings.warn(
                f"beta0={self.beta0} outside ({lo:g}, {lo + self.alpha0:g}] for k={self.k}",
                ParameterIntervalWarning,
                stacklevel=3,
            )

    @property
    def freq_exponent(self) -> float:
        return 1.0 + self.alpha0


class RadialProfile:
    """g(r) = phi1(r) r^beta0 sin(r^-(1+alpha0)) with closed-form g', g''."""

    def __init__(self, params: ProfileParams | None = None):
        self.params = params or ProfileParams()

    def _core(self, r, deriv):
        b = self.params.beta0
        a = self.params.freq_exponent
        u = r ** (-a)
        sn, cs = np.sin(u), np.cos(u)
        if deriv == 0:
            return r**b * sn
        if deriv == 1:
            return b * r ** (b - 1) * sn - a * r ** (b - 1 - a) * cs
        return (
            b * (b - 1) * r ** (b - 2) * sn
            - a * (2 * b - 1 - a) * r ** (b - 2 - a) * cs
            - a * a * r ** (b - 2 - 2 * a) * sn
        )

    def __call__(self, r, deriv: int = 0):
        r = np.asarray(r, dtype=float)
        if deriv not in (0, 1, 2):
            raise ValueError("deriv must be 0, 1 or 2")
        if deriv >= 1 and np.any(r <= 0):
            raise ValueError("derivatives of g are singular at r = 0")
        rs = np.where(r > 0, r, 1.0)
        phi = cutoff_phi1(rs)
        if deriv == 0:
            return np.where(r > 0, phi * self._core(rs, 0), 0.0)
        phi1 = cutoff_phi1(rs, 1)
        if deriv == 1:
            return phi1 * self._core(rs, 0) + phi * self._core(rs, 1)
        phi2 = cutoff_phi1(rs, 2)
        return phi2 * self._core(rs, 0) + 2 * phi1 * self._core(rs, 1) + phi * self._core(rs, 2)

    def dominant_exponent(self, deriv: int) -> float:
        b, al = self.params.beta0, self.params.alpha0
        return {0: b, 1: b - 2 - al, 2: b - 4 - 2 * al}[deriv]

    def extrema_radii(self, deriv: int, r_lo: float, r_hi: float) -> np.ndarray:
        """Radii in [r_lo, r_hi] where the dominant term of g^(deriv) peaks."""
        a = self.params.freq_exponent
        u_lo, u_hi = r_hi ** (-a), r_lo ** (-a)
        # odd derivatives: dominant term ~ cos(u); even: ~ sin(u)
        offset = 0.0 if deriv % 2 == 1 else 0.5
        m = np.arange(np.ceil(u_lo / np.pi - offset), np.floor(u_hi / np.pi - offset) + 1)
        u = (m + offset) * np.pi
        u = u[u > 0]
        return np.sort(u ** (-1.0 / a))

    def __repr__(self):
        p = self.params
        return f"RadialProfile(k={p.k}, alpha0={p.alpha0}, beta0={p.beta0})"


class SurrogateProfile:
    """Smooth stand-in g(r) = A r^2 exp(-(r/w)^2) for convergence studies."""

    def __init__(self, amplitude: float = 1.0, width: float = 1.0):
        self.amplitude = float(amplitude)
        self.width = float(width)

    def __call__(self, r, deriv: int = 0):
        r = np.asarray(r, dtype=float)
        a, w = self.amplitude, self.width
        e = np.exp(-(r / w) ** 2)
        if deriv == 0:
            return a * r * r * e
        if deriv == 1:
            return a * (2 * r - 2 * r**3 / w**2) * e
        if deriv == 2:
            return a * (2 - 10 * r**2 / w**2 + 4 * r**4 / w**4) * e
        raise ValueError("deriv must be 0, 1 or 2")

    def extrema_radii(self, deriv, r_lo, r_hi):
        return np.geomspace(r_lo, r_hi, 64)

    def dominant_exponent(self, deriv):
        return {0: 2.0, 1: 1.0, 2: 0.0}[deriv]

    def __repr__(self):
        return f"SurrogateProfile(amplitude={self.amplitude}, width={self.width})"


def singularity_order_probe(profile, quantity: int = 2, r_lo: float = 1e-4, r_hi: float = 1e-1, max_points: int = 400):
    """Slope of log|g^(quantity)| against log r over the peak radii of its dominant term.

    Returns (slope, residual rms).
    """
    if quantity not in (1, 2):
        raise ValueError("quantity must be 1 (g') or 2 (g'')")
    r = profile.extrema_radii(quantity, r_lo, r_hi)
    if len(r) < 8:
        raise FitFailure(f"only {len(r)} extrema in [{r_lo}, {r_hi}]")
    if len(r) > max_points:
        idx = np.unique(np.geomspace(1, len(r), max_points).astype(int) - 1)
        r = r[idx]
    val = np.abs(profile(r, quantity))
    keep = val > 0
    if keep.sum() < 8:
        raise FitFailure("too many vanishing samples")
    x, y = np.log(r[keep]), np.log(val[keep])
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    rms = float(np.sqrt(res[0] / len(x))) if len(res) else 0.0
    return float(coef[0]), rms


# ---------------------------------------------------------------------------
# velocity and vorticity data


@dataclass(frozen=True)
class DataSpec:
    i0: int = 1
    completion_mode: str = PROJECTED
    profile: object = None

    def __post_init__(self):
        if self.i0 not in (1, 2, 3):
            raise ValueError("i0 must be 1, 2 or 3")
        if self.completion_mode not in COMPLETION_MODES:
            raise ValueError(f"completion_mode must be one of {COMPLETION_MODES}")
        if self.profile is None:
            object.__setattr__(self, "profile", RadialProfile())


def build_velocity_data(spec: DataSpec, grid: Grid) -> VectorField3:
    vals = np.zeros((3,) + grid.shape)
    vals[spec.i0 - 1] = spec.profile(grid.radius)
    if spec.completion_mode == PROJECTED:
        vals = leray_project_array(vals, grid)
    return VectorField3(grid, vals)


def build_vorticity_data(v_f: VectorField3) -> VectorField3:
    return curl(v_f)


def vorticity_closed_form(spec: DataSpec, x) -> np.ndarray:
    """curl(g(r) e_i0) at points x (trailing dim 3); projection leaves the curl unchanged."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    gp = spec.profile(r, 1)
    grad = gp[..., None] * x / r[..., None]
    e = np.zeros(3)
    e[spec.i0 - 1] = 1.0
    # curl(g e) = grad g x e
    return np.cross(grad, e)
