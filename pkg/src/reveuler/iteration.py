"""Picard iteration for the viscosity-extended time-reversed Euler equation.

Velocity form, for k >= 1 and every slice time t:

    v^k(t) = v^f *_sp G(t) + int_0^t [ sB * B(v^{k-1}) + sL * L(v^{k-1}) + F ](s) *_sp G(t-s) ds

with B(v)_i = sum_j v_j d_j v_i (Burgers term), L(v) = grad Delta^-1 sum v_{m,j} v_{j,m}
(Leray term), default signs sB = +1, sL = -1, and optional forcing F.  The
scheme starts from v^0(t) = v^f *_sp G(t).  The vorticity form uses the same
time grid with advection v.grad(omega) carrying sB and the stretching term
Sym(grad v) omega carrying sL.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .convolution import (
    FAST,
    TimeSlab,
    _newton_sum,
    conv_array,
    conv_spacetime_array,
    leray_source_array,
    newton_gradient_array,
)
from .data import DataSpec, build_velocity_data
from .fields import Grid, NormKind, VectorField3, curl_array, d1, make_grid, norm_array

ADVECTIVE = "advective"
KERNEL_DERIVATIVE = "kernel_derivative"


class NonFiniteField(FloatingPointError):
    """An iterate contains inf or nan."""

    def __init__(self, k: int, t: float, what: str = "velocity"):
        super().__init__(f"non-finite {what} iterate at k={k}, t={t:g}")
        self.k = k
        self.t = t


@dataclass(frozen=True)
class SignPack:
    """Two switches over the nonlinear-term signs.

    ``flip_burgers`` negates the Burgers term and, in the vorticity form, the
    advection term.  ``flip_leray`` negates the Leray term and the stretching term.
    """

    flip_burgers: bool = False
    flip_leray: bool = False

    @property
    def burgers(self) -> float:
        return -1.0 if self.flip_burgers else 1.0

    @property
    def leray(self) -> float:
        return 1.0 if self.flip_leray else -1.0


@dataclass
class IterationConfig:
    nu: float = 0.1
    T: float = 0.5
    n_steps: int = 16
    K_max: int = 8
    data: DataSpec = field(default_factory=DataSpec)
    grid: Grid = field(default_factory=lambda: make_grid(4.0, 33))
    conv_path: str = FAST
    signs: SignPack = field(default_factory=SignPack)
    burgers_form: str = ADVECTIVE
    leray_method: str = "fft"
    leray_corrected: bool = False
    track_vorticity: bool = False
    stop_tol: float = 1e-10
    backend: str | None = None
    # overrides for manufactured-solution runs
    initial: VectorField3 | None = None
    forcing: np.ndarray | None = None  # shape (n_steps+1, 3, n, n, n)

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if self.K_max < 3:
            raise ValueError("K_max must be >= 3")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.burgers_form not in (ADVECTIVE, KERNEL_DERIVATIVE):
            raise ValueError(f"burgers_form must be {ADVECTIVE!r} or {KERNEL_DERIVATIVE!r}")
        if self.forcing is not None:
            shape = (self.n_steps + 1, 3) + self.grid.shape
            if np.shape(self.forcing) != shape:
                raise ValueError(f"forcing must have shape {shape}")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_steps + 1)


@dataclass
class IterationState:
    k: int
    v_slab: TimeSlab
    w_slab: TimeSlab | None = None

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.w_slab is not None and self.w_slab.grid != self.v_slab.grid:
            raise ValueError("velocity and vorticity slabs on different grids")


# ---------------------------------------------------------------------------
# nonlinear terms on arrays


def _grad_stack(v: np.ndarray, h: float) -> np.ndarray:
    # g[i, j] = d_j v_i
    return np.stack([np.stack([d1(v[i], ax, h) for ax in (-3, -2, -1)]) for i in range(3)])


def advection_array(v: np.ndarray, w: np.ndarray, h: float) -> np.ndarray:
    """(v . grad) w, component-wise."""
    g = _grad_stack(w, h)
    return np.einsum("j...,ij...->i...", v, g)


def burgers_array(v: np.ndarray, h: float) -> np.ndarray:
    return advection_array(v, v, h)


def burgers_term(v: VectorField3) -> VectorField3:
    """Component i: sum_j v_j d_j v_i."""
    return VectorField3(v.grid, burgers_array(v.values, v.grid.h), v.boundary_layer + 1)


def stretching_array(v: np.ndarray, w: np.ndarray, h: float) -> np.ndarray:
    """Sym(grad v) w, i.e. component i = sum_j (d_j v_i + d_i v_j) w_j / 2."""
    g = _grad_stack(v, h)
    sym = 0.5 * (g + np.swapaxes(g, 0, 1))
    return np.einsum("ij...,j...->i...", sym, w)


# ---------------------------------------------------------------------------
# scheme


def _check(arr, k, times, what):
    if not np.all(np.isfinite(arr)):
        bad = [j for j in range(len(times)) if not np.all(np.isfinite(arr[j]))]
        raise NonFiniteField(k, float(times[bad[0]]), what)


def initial_velocity(config: IterationConfig) -> VectorField3:
    if config.initial is not None:
        return config.initial
    return build_velocity_data(config.data, config.grid)


def _heat_slab(f0: np.ndarray, config: IterationConfig) -> np.ndarray:
    times = config.times
    out = np.empty((len(times),) + f0.shape)
    out[0] = f0
    for j in range(1, len(times)):
        out[j] = conv_array(f0, config.grid, config.nu, times[j], (0, 0, 0), config.conv_path, config.backend)
    return out


def picard_init(config: IterationConfig) -> IterationState:
    """State 0: v^f *_sp G(t) on every slice, v^f itself at t = 0."""
    v_f = initial_velocity(config)
    vals = _heat_slab(v_f.values, config)
    _check(vals, 0, config.times, "velocity")
    w_slab = None
    if config.track_vorticity:
        w0 = curl_array(v_f.values, config.grid.h)
        w_slab = TimeSlab(config.grid, config.times, _heat_slab(w0, config))
    return IterationState(0, TimeSlab(config.grid, config.times, vals), w_slab)


def _duhamel(src: np.ndarray, config: IterationConfig) -> np.ndarray:
    slab = TimeSlab(config.grid, config.times, src)
    out = np.zeros_like(src)
    for j in range(1, len(config.times)):
        out[j] = conv_spacetime_array(slab, config.nu, config.times[j], (0, 0, 0), config.conv_path, config.backend)
    return out


def _duhamel_divergence_form(flux: np.ndarray, config: IterationConfig) -> np.ndarray:
    # flux[l, i, j] = (v_j v_i)(s_l); sum_j of flux_ij * d_j G
    times = config.times
    out = np.zeros((len(times), 3) + config.grid.shape)
    for jax in range(3):
        gamma = tuple(int(a == jax) for a in range(3))
        slab = TimeSlab(config.grid, times, flux[:, :, jax])
        for j in range(1, len(times)):
            out[j] += conv_spacetime_array(slab, config.nu, times[j], gamma, config.conv_path, config.backend)
    return out


def velocity_source(v: np.ndarray, config: IterationConfig, include_burgers: bool = True) -> np.ndarray:
    """sB * B(v) + sL * L(v) on one slice."""
    h = config.grid.h
    src = leray_source_array(v, h)
    lt = newton_gradient_array(src, config.grid, config.leray_method, config.backend, config.leray_corrected)
    out = config.signs.leray * lt
    if include_burgers:
        out = out + config.signs.burgers * burgers_array(v, h)
    return out


def picard_step(prev: IterationState, config: IterationConfig, base: TimeSlab | None = None) -> IterationState:
    """One Picard update over all slices; ``base`` is state 0's slab (recomputed if omitted)."""
    times = config.times
    if base is None:
        base = picard_init(config).v_slab
    v_prev = prev.v_slab.values
    advective = config.burgers_form == ADVECTIVE
    src = np.stack([velocity_source(v_prev[l], config, advective) for l in range(len(times))])
    if config.forcing is not None:
        src = src + config.forcing
    new = base.values + _duhamel(src, config)
    if not advective:
        flux = v_prev[:, :, None] * v_prev[:, None, :]  # [l, i, j] = v_i v_j
        new = new + config.signs.burgers * _duhamel_divergence_form(flux, config)
    new[0] = base.values[0]
    _check(new, prev.k + 1, times, "velocity")
    return IterationState(prev.k + 1, TimeSlab(config.grid, times, new), None)


def vorticity_source(v: np.ndarray, w: np.ndarray, config: IterationConfig) -> np.ndarray:
    """sB * (v . grad) w + sL * Sym(grad v) w on one slice (sL = -1 by default)."""
    h = config.grid.h
    return config.signs.burgers * advection_array(v, w, h) + config.signs.leray * stretching_array(v, w, h)


def _curl_forcing(config: IterationConfig) -> np.ndarray | None:
    if config.forcing is None:
        return None
    return np.stack([curl_array(f, config.grid.h) for f in config.forcing])


def vorticity_step(prev_w: TimeSlab, prev_v: TimeSlab, config: IterationConfig, w_base: TimeSlab) -> TimeSlab:
    """omega^k from omega^{k-1} and v^{k-1}; ``w_base`` holds omega^f *_sp G on every slice."""
    if prev_w.values.shape != prev_v.values.shape:
        raise ValueError("vorticity and velocity slabs are not aligned")
    times = config.times
    src = np.stack([vorticity_source(prev_v.values[l], prev_w.values[l], config) for l in range(len(times))])
    cf = _curl_forcing(config)
    if cf is not None:
        src = src + cf
    new = w_base.values + _duhamel(src, config)
    new[0] = w_base.values[0]
    return TimeSlab(config.grid, times, new)


# ---------------------------------------------------------------------------
# trace


@dataclass
class IterationTrace:
    config: IterationConfig
    states: list
    base: TimeSlab
    w_base: TimeSlab | None = None
    stop_reason: str = "K_max"
    _norms: dict = field(default_factory=dict, repr=False)

    @property
    def K(self) -> int:
        return self.states[-1].k

    @property
    def times(self) -> np.ndarray:
        return self.base.times

    def velocity(self, k: int) -> np.ndarray:
        return self.states[k].v_slab.values

    def vorticity(self, k: int) -> np.ndarray:
        w = self.states[k].w_slab
        if w is None:
            raise ValueError("trace was run without vorticity tracking")
        return w.values

    def delta(self, k: int) -> np.ndarray:
        """v^k - v^{k-1} on all slices."""
        if k < 1:
            raise ValueError("delta needs k >= 1")
        return self.velocity(k) - self.velocity(k - 1)

    def delta_init(self, k: int) -> np.ndarray:
        """v^k - v^f *_sp G on all slices."""
        return self.velocity(k) - self.base.values

    def delta_vorticity(self, k: int) -> np.ndarray:
        return self.vorticity(k) - self.vorticity(k - 1)

    def norm(self, k: int, j: int, kind: NormKind, which: str = "delta", exclude_origin: float | None = None) -> float:
        key = (k, j, kind, which, exclude_origin)
        if key not in self._norms:
            src = {"delta": self.delta, "delta_init": self.delta_init, "v": self.velocity}[which](k)
            self._norms[key] = norm_array(src[j], self.config.grid, kind, exclude_origin)
        return self._norms[key]

    def origin_radius(self) -> float:
        return 5.0 * self.config.grid.h

    def norm_rows(self, kinds, which: str = "delta"):
        """Rows (k, t, label, value, origin_excluded) for every k >= 1, slice, kind, and both origin options."""
        rows = []
        k0 = 1 if which == "delta" else 0
        for k in range(k0, self.K + 1):
            for j, t in enumerate(self.times):
                for kind in kinds:
                    for ex in (None, self.origin_radius()):
                        val = self.norm(k, j, kind, which, ex)
                        rows.append((k, float(t), kind.label, val, ex is not None))
        return rows

    def to_csv(self, kinds, which: str = "delta", header_lines=()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "t", "norm_kind", "value", "origin_excluded"])
        for k, t, label, val, ex in self.norm_rows(kinds, which):
            w.writerow([k, repr(t), label, repr(val), int(ex)])
        return buf.getvalue()


def _c2_increment(delta: np.ndarray, grid: Grid) -> float:
    kind = NormKind.C(2)
    return max(norm_array(delta[j], grid, kind) for j in range(delta.shape[0]))


def run_picard(config: IterationConfig, progress=None) -> IterationTrace:
    """Iterate to K_max, stopping early once the C^2 increment norm drops below ``stop_tol``."""
    state = picard_init(config)
    base = state.v_slab
    w_base = state.w_slab
    trace = IterationTrace(config, [state], base, w_base)
    for _ in range(config.K_max):
        prev = trace.states[-1]
        nxt = picard_step(prev, config, base)
        if config.track_vorticity:
            nxt.w_slab = vorticity_step(prev.w_slab, prev.v_slab, config, w_base)
            _check(nxt.w_slab.values, nxt.k, config.times, "vorticity")
        trace.states.append(nxt)
        if progress is not None:
            progress(nxt.k)
        if _c2_increment(trace.delta(nxt.k), config.grid) < config.stop_tol:
            trace.stop_reason = "increment"
            break
    return trace


# ---------------------------------------------------------------------------
# vorticity increment identity and the Biot-Savart cross-check


def vorticity_increment_recursion(trace: IterationTrace) -> dict:
    """C^0 gap between differenced and recursively assembled vorticity increments, per k >= 2.

    delta omega^k = int [ sB (dv.grad omega^{k-1} + v^{k-2}.grad d omega^{k-1})
                        + sL (Sym grad dv omega^{k-1} + Sym grad v^{k-2} d omega^{k-1}) ] * G
    with dv = v^{k-1} - v^{k-2} and d omega^{k-1} = omega^{k-1} - omega^{k-2}.
    """
    cfg = trace.config
    h = cfg.grid.h
    sb, sl = cfg.signs.burgers, cfg.signs.leray
    out = {}
    for k in range(2, trace.K + 1):
        v1, v2 = trace.velocity(k - 1), trace.velocity(k - 2)
        w1, w2 = trace.vorticity(k - 1), trace.vorticity(k - 2)
        dv, dw = v1 - v2, w1 - w2
        src = np.stack(
            [
                sb * (advection_array(dv[l], w1[l], h) + advection_array(v2[l], dw[l], h))
                + sl * (stretching_array(dv[l], w1[l], h) + stretching_array(v2[l], dw[l], h))
                for l in range(len(cfg.times))
            ]
        )
        rec = _duhamel(src, cfg)
        direct = trace.delta_vorticity(k)
        out[k] = float(np.max(np.abs(direct - rec)))
    return out


def biot_savart_velocity(w: np.ndarray, grid: Grid) -> np.ndarray:
    """Velocity whose curl is ``w``: -(grad K) *x w, summed over the grid.

    This is the standard orientation u = (1/4pi) int w(y) x (x - y)/|x - y|^3 dy.
    """
    g = np.stack([_newton_sum(w[m], grid, "fft", None) for m in range(3)])  # g[m, j] = d_j K * w_m
    u = np.empty((3,) + grid.shape)
    u[0] = -(g[2, 1] - g[1, 2])
    u[1] = -(g[0, 2] - g[2, 0])
    u[2] = -(g[1, 0] - g[0, 1])
    return u


def biot_savart_crosscheck(trace: IterationTrace, k: int, j: int, core_radius: float = 1.5) -> float:
    """Relative C^0 gap between v^k(t_j) and its Biot-Savart reconstruction from omega^k(t_j) on |x| <= core_radius."""
    grid = trace.config.grid
    v = trace.velocity(k)[j]
    u = biot_savart_velocity(trace.vorticity(k)[j], grid)
    core = grid.radius <= core_radius
    scale = float(np.max(np.abs(v[:, core])))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs((u - v)[:, core])) / scale)
