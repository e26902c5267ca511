"""Quantitative checks on Picard traces and data: contraction, decay, moments, limits, singularities."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import RegularGridInterpolator

from .convolution import TimeSlab, conv_spacetime_array, second_moment
from .data import DataSpec, FitFailure, RadialProfile
from .fields import Grid, NormKind, ScalarField3, d1, d2, divergence_array, multi_indices, norm_array, partial

EPS = np.finfo(float).eps


class ContractFailure(AssertionError):
    """A diagnostics contract did not hold."""


@dataclass
class ContractResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}  {self.detail}".rstrip()


# ---------------------------------------------------------------------------
# contraction


@dataclass
class ContractionTable:
    kind: NormKind
    per_slice: dict  # (k, j) -> ratio
    sup: dict  # k -> sup_t |dv^{k+1}| / sup_t |dv^k|

    def ks(self):
        return sorted(self.sup)

    def max_ratio(self, k_lo: int = 3, k_hi: int | None = None) -> float:
        vals = [r for (k, _), r in self.per_slice.items() if k >= k_lo and (k_hi is None or k <= k_hi)]
        return max(vals) if vals else 0.0


def _ratio_floor(trace, k, j, kind) -> float:
    # increments within ~1e3 ulps of the iterate itself are rounding noise
    return max(1e-14, 1e3 * EPS * trace.norm(k, j, kind, "v"))


def contraction_ratios(trace, kind: NormKind = NormKind.C(2)) -> ContractionTable:
    """r_k = |dv^{k+1}(t)| / |dv^k(t)| per stored slice, plus the sup-over-t version."""
    if trace.K < 5 and trace.stop_reason == "K_max":
        raise ValueError("contraction ratios need a trace with K >= 5")
    per, sup = {}, {}
    nt = len(trace.times)
    for k in range(1, trace.K):
        num = [trace.norm(k + 1, j, kind) for j in range(nt)]
        den = [trace.norm(k, j, kind) for j in range(nt)]
        for j in range(1, nt):
            if den[j] > _ratio_floor(trace, k, j, kind):
                per[(k, j)] = num[j] / den[j]
        if max(den) > 1e-14:
            sup[k] = max(num) / max(den)
    return ContractionTable(kind, per, sup)


# ---------------------------------------------------------------------------
# decay envelopes


def decay_envelope_table(trace, order: float = 8.0, max_derivative: int = 3, which: str = "delta", slices=None) -> dict:
    """(k, m, j) -> max over |gamma| = m and |x| >= 1 of |D^gamma dv^k(t_j)| (1 + |x|^order)."""
    grid = trace.config.grid
    if grid.extent < 3:
        raise ValueError("decay envelopes need R >= 3")
    r = grid.radius
    sel = r >= 1.0
    weight = (1.0 + r**order)[sel]
    js = range(len(trace.times)) if slices is None else slices
    k0 = 1 if which == "delta" else 0
    out = {}
    for k in range(k0, trace.K + 1):
        src = trace.delta(k) if which == "delta" else trace.delta_init(k)
        for j in js:
            best = [0.0] * (max_derivative + 1)
            for gamma in multi_indices(max_derivative):
                der = partial(src[j], gamma, grid.h)
                m = sum(gamma)
                best[m] = max(best[m], float(np.max(np.abs(der[:, sel]) * weight)))
            for m, val in enumerate(best):
                out[(k, m, j)] = val
    return out


def decay_contract(table: dict, k_ref: int = 3, factor: float = 2.0) -> tuple[bool, float]:
    """Column max over k >= k_ref bounded by ``factor`` times the k_ref value; returns (ok, worst ratio)."""
    worst = 0.0
    for (k, m, j), val in table.items():
        if k < k_ref:
            continue
        ref = table[(k_ref, m, j)]
        if ref == 0.0:
            if val > 0.0:
                return False, math.inf
            continue
        worst = max(worst, val / ref)
    return worst <= factor, worst


# ---------------------------------------------------------------------------
# moment bound


def measured_lipschitz(values: np.ndarray, grid: Grid) -> float:
    g = np.stack([d1(values, ax, grid.h) for ax in (-3, -2, -1)])
    return float(np.max(np.sqrt(np.sum(g * g, axis=0))))


def kernel_interior(grid: Grid, nu: float, t: float) -> np.ndarray:
    """Nodes whose distance to every face exceeds six kernel widths."""
    margin = 6.0 * math.sqrt(2.0 * nu * t)
    x1, x2, x3 = grid.coords
    lim = grid.extent - margin
    return (np.abs(x1) <= lim) & (np.abs(x2) <= lim) & (np.abs(x3) <= lim)


def moment_bound_check(F, grid: Grid, nu: float, t: float, axis: int = 0, L: float | None = None, n_slices: int = 16):
    """(lhs, rhs) with lhs = sup |int_0^t F *_sp d_axis G(t - s) ds| over the kernel interior and rhs = 4 L M2.

    F is held constant in time.  ``L`` defaults to the measured maximal gradient norm.
    """
    vals = np.asarray(getattr(F, "values", F), dtype=float)
    if L is None:
        L = measured_lipschitz(vals, grid)
    times = np.linspace(0.0, t, n_slices + 1)
    slab = TimeSlab(grid, times, np.broadcast_to(vals, (len(times),) + vals.shape))
    gamma = tuple(int(a == axis) for a in range(3))
    res = conv_spacetime_array(slab, nu, t, gamma, warn=False)
    mask = kernel_interior(grid, nu, t)
    lhs = float(np.max(np.abs(res[mask]))) if mask.any() else 0.0
    rhs = 4.0 * L * second_moment(nu, t, axis)
    return lhs, rhs


def random_lipschitz_field(rng: np.random.Generator, grid: Grid) -> np.ndarray:
    """Random mix of a linear ramp, a plane wave and a cone kink; Lipschitz by construction."""
    x = np.stack(grid.mesh())
    d = rng.normal(size=3)
    kvec = rng.normal(size=3)
    kvec *= rng.uniform(0.3, 2.0) / np.linalg.norm(kvec)
    c0 = rng.uniform(-0.5, 0.5, size=3) * grid.extent
    a, b, c = rng.uniform(-1.0, 1.0, size=3)
    ramp = np.einsum("i,i...->...", d / np.linalg.norm(d), x)
    wave = np.sin(np.einsum("i,i...->...", kvec, x) + rng.uniform(0, 2 * np.pi))
    cone = np.minimum(1.0, np.sqrt(np.sum((x - c0[:, None, None, None]) ** 2, axis=0)))
    return a * ramp + b * wave + c * cone


# ---------------------------------------------------------------------------
# viscosity sweep


@dataclass
class SweepResult:
    nus: list
    matrix: np.ndarray
    ratios: dict  # (nu, label) -> {k: sup ratio}

    def consecutive(self) -> list:
        return [float(self.matrix[p, p + 1]) for p in range(len(self.nus) - 1)]

    def strictly_decreasing(self, slack: float = 1e-12) -> bool:
        c = self.consecutive()
        return all(c[p + 1] < c[p] - slack for p in range(len(c) - 1))

    def ratio_spread(self, label: str = "HC2", k_lo: int = 3) -> float:
        """max over k >= k_lo of (max_nu r_k / min_nu r_k - 1)."""
        worst = 0.0
        ks = set.intersection(*[set(self.ratios[(nu, label)]) for nu in self.nus])
        for k in sorted(ks):
            if k < k_lo:
                continue
            vals = [self.ratios[(nu, label)][k] for nu in self.nus]
            worst = max(worst, max(vals) / min(vals) - 1.0)
        return worst


def viscosity_sweep(template, nus, kind: NormKind = NormKind.C(1), exclude_origin: float | None = None, run=None) -> SweepResult:
    """Cauchy matrix of total increments v^K - v^f *_sp G at the final slice across a descending nu list."""
    from .iteration import run_picard

    nus = [float(x) for x in nus]
    if len(nus) < 3:
        raise ValueError("a viscosity sweep needs at least 3 values")
    run = run or run_picard
    finals, ratios = [], {}
    for nu in nus:
        tr = run(replace(template, nu=nu))
        finals.append(tr.delta_init(tr.K)[-1])
        for label, nk in (("HC2", NormKind.HC(2)), ("HC3", NormKind.HC(3))):
            ratios[(nu, label)] = contraction_ratios(tr, nk).sup
    grid = template.grid
    m = len(nus)
    mat = np.zeros((m, m))
    for p in range(m):
        for q in range(p + 1, m):
            mat[p, q] = mat[q, p] = norm_array(finals[p] - finals[q], grid, kind, exclude_origin)
    return SweepResult(nus, mat, ratios)


# ---------------------------------------------------------------------------
# incompressibility


def incompressibility_residual(trace, core_radius: float | None = None) -> dict:
    """(k, j) -> max |div v^k(t_j)| over |x| <= core_radius (default R/2, clear of the zero-padded faces)."""
    grid = trace.config.grid
    rc = 0.5 * grid.extent if core_radius is None else core_radius
    mask = grid.radius <= rc
    out = {}
    for k in range(trace.K + 1):
        v = trace.velocity(k)
        for j in range(1, len(trace.times)):
            out[(k, j)] = float(np.max(np.abs(divergence_array(v[j], grid.h)[mask])))
    return out


def growth_ratio(residuals: dict) -> float:
    """max over k of sup_t residual(k) / sup_t residual(0)."""
    ks = sorted({k for k, _ in residuals})
    sup = {k: max(v for (kk, _), v in residuals.items() if kk == k) for k in ks}
    if sup[ks[0]] == 0.0:
        return 0.0 if all(v == 0.0 for v in sup.values()) else math.inf
    return max(sup[k] / sup[ks[0]] for k in ks)


def loglog_slope(xs, ys) -> tuple[float, float]:
    """Least-squares slope of log y against log x and the rms residual."""
    x, y = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    if len(x) < 2:
        raise FitFailure("need at least two points")
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    rms = float(np.sqrt(res[0] / len(x))) if len(res) else 0.0
    return float(coef[0]), rms


# ---------------------------------------------------------------------------
# singularity probing


@dataclass
class BlowupResult:
    hs: list
    sups: list
    exponent: float
    residual: float
    derivative_exponents: dict = field(default_factory=dict)  # m -> exponent of sup |g^(m)|
    kink_order: int | None = None


def _probe_radii(profile, r_lo: float, r_hi: float) -> np.ndarray:
    if isinstance(profile, RadialProfile):
        a = profile.params.freq_exponent
        u_lo, u_hi = r_hi ** (-a), r_lo ** (-a)
        n = int(np.ceil((u_hi - u_lo) / (np.pi / 32))) + 2
        u = np.linspace(u_lo, u_hi, min(n, 2_000_000))
        return u ** (-1.0 / a)
    return np.geomspace(r_lo, r_hi, 4096)


def resolved_sup(profile, deriv: int, h: float, r_probe: float) -> float:
    """sup of |g^(deriv)| over r in [r_min(h), r_probe]; r_min = h sqrt(3)/2 is the nearest-node radius."""
    r_min = 0.5 * math.sqrt(3.0) * h
    if r_min >= r_probe:
        raise FitFailure(f"nearest-node radius {r_min:g} is outside the probe ball {r_probe:g}")
    r = _probe_radii(profile, r_min, r_probe)
    return float(np.max(np.abs(profile(r, deriv))))


def blowup_indicator(spec: DataSpec, grids, r_probe: float = 0.1, bounded_tol: float = 0.02) -> BlowupResult:
    """Growth exponent e of sup |omega^f| ~ h^e across refinement levels, plus a kink-order probe.

    |omega^f| = |g'(r)| |sin angle(x, e_i0)|, so its sup over the nodes resolved
    at spacing h is the sup of |g'| over r in [h sqrt(3)/2, r_probe].  The
    closed form is scanned at a fraction of the oscillation period; sampling
    the nodes themselves would alias r^-(1+alpha0) oscillations.  The kink
    order is the smallest m whose sup |g^(m)| grows (exponent < -bounded_tol).
    """
    grids = list(grids)
    if len(grids) < 3:
        raise FitFailure("blow-up probing needs at least 3 refinement levels")
    hs = [g.h for g in grids]
    prof = spec.profile
    derivs = {}
    sups1 = None
    for m in (1, 2):
        s = [resolved_sup(prof, m, h, r_probe) for h in hs]
        derivs[m] = loglog_slope(hs, s)[0]
        if m == 1:
            sups1 = s
    e, res = loglog_slope(hs, sups1)
    kink = next((m for m in (1, 2) if derivs[m] < -bounded_tol), None)
    return BlowupResult(hs, sups1, e, res, derivs, kink)


# ---------------------------------------------------------------------------
# force term


def force_term(w: np.ndarray, grid: Grid, nu: float) -> np.ndarray:
    """F = -nu Lap(omega) on a slab (..., 3, n, n, n) or a single field."""
    if nu < 0:
        raise ValueError("nu must be >= 0")
    w = np.asarray(w, dtype=float)
    lap = d2(w, -3, grid.h) + d2(w, -2, grid.h) + d2(w, -1, grid.h)
    return -nu * lap


def force_time_l2(F: np.ndarray, times, grid: Grid) -> float:
    """Trapezoid in time of |F(t)|_{L2}^2."""
    wsp = grid.trapezoid_weights()
    per = np.array([float(np.sum(F[l] * F[l] * wsp)) for l in range(len(times))])
    return float(trapezoid(per, times))


# ---------------------------------------------------------------------------
# compactification


@dataclass
class CompactField:
    y_axis: np.ndarray
    values: np.ndarray


def compactify_field(f: ScalarField3, n_out: int | None = None) -> CompactField:
    """Resample f onto a uniform grid in y = arctan(x) covering the image of the box."""
    grid = f.grid
    n_out = n_out or grid.n
    ax = grid.axis
    y = np.linspace(np.arctan(ax[0]), np.arctan(ax[-1]), n_out)
    x = np.clip(np.tan(y), ax[0], ax[-1])
    interp = RegularGridInterpolator((ax, ax, ax), f.values, method="linear")
    X1, X2, X3 = np.meshgrid(x, x, x, indexing="ij")
    vals = interp(np.stack([X1, X2, X3], axis=-1))
    return CompactField(y, vals)


def compactified_derivative_check(f: ScalarField3, c0: float = 1.0, slack: float = 0.1) -> tuple[bool, float]:
    """Check |d_{y_j} f_c| <= c0 (1 + |x|^2) max_j |d_{x_j} f| at the x nodes via the chain rule.

    d/dy_j = (1 + x_j^2) d/dx_j, so the ratio is at most one; returns (ok, worst ratio).
    """
    grid = f.grid
    x1, x2, x3 = grid.mesh()
    r2 = x1 * x1 + x2 * x2 + x3 * x3
    grads = np.stack([d1(f.values, ax, grid.h) for ax in (-3, -2, -1)])
    lhs = np.max(np.abs(np.stack([(1 + x1 * x1) * grads[0], (1 + x2 * x2) * grads[1], (1 + x3 * x3) * grads[2]])), axis=0)
    rhs = c0 * (1.0 + r2) * np.max(np.abs(grads), axis=0)
    nz = rhs > 0
    worst = float(np.max(lhs[nz] / rhs[nz])) if nz.any() else 0.0
    return worst <= c0 * (1.0 + slack), worst


# ---------------------------------------------------------------------------
# report


@dataclass
class DiagnosticsReport:
    fingerprint: str
    contracts: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)  # name -> (header, rows)

    def add(self, result: ContractResult):
        self.contracts.append(result)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.contracts)

    def all_finite(self) -> bool:
        for _, rows in self.tables.values():
            for row in rows:
                for v in row:
                    if isinstance(v, float) and not math.isfinite(v):
                        return False
        return True

    def summary(self) -> str:
        lines = [f"fingerprint {self.fingerprint}"]
        lines += [c.line() for c in self.contracts]
        lines.append(f"overall {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"
