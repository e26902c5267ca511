"""Truncated 3-D grids, sampled fields, finite differences and discrete norms.

Grids cover the cube [-R, R]^3 with ``n`` nodes per axis, shifted by half a
cell so that no node sits on the origin (the data are singular there).
Arrays always carry the three spatial axes last; vector fields stack their
components on a leading axis of length 3.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np


class GridError(ValueError):
    """Invalid grid parameters."""


class EvenN(GridError):
    """Grid size must be odd."""


@dataclass(frozen=True)
class Grid:
    extent: float
    n: int
    shifted: bool = True

    def __post_init__(self):
        if not self.extent > 0:
            raise GridError(f"extent_R must be positive, got {self.extent}")
        if self.n % 2 == 0:
            raise EvenN(f"n must be odd, got {self.n}")
        if self.n < 9:
            raise GridError(f"n must be >= 9 for the derivative stencils, got {self.n}")

    @property
    def h(self) -> float:
        return 2.0 * self.extent / (self.n - 1)

    @property
    def shift(self) -> float:
        return 0.5 * self.h if self.shifted else 0.0

    @cached_property
    def axis(self) -> np.ndarray:
        """Node coordinates along one axis (identical for all three)."""
        return -self.extent + np.arange(self.n) * self.h + self.shift

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable coordinate arrays (x1, x2, x3)."""
        a = self.axis
        return a[:, None, None], a[None, :, None], a[None, None, :]

    @cached_property
    def radius(self) -> np.ndarray:
        x1, x2, x3 = self.coords
        return np.sqrt(x1 * x1 + x2 * x2 + x3 * x3)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Full (n, n, n) coordinate arrays."""
        return tuple(np.broadcast_to(c, self.shape) for c in self.coords)

    def nearest_node(self, point) -> tuple[int, int, int]:
        idx = np.rint((np.asarray(point, dtype=float) + self.extent - self.shift) / self.h)
        return tuple(int(np.clip(i, 0, self.n - 1)) for i in idx)

    def trapezoid_weights(self) -> np.ndarray:
        w1 = np.full(self.n, self.h)
        w1[0] = w1[-1] = 0.5 * self.h
        return w1[:, None, None] * w1[None, :, None] * w1[None, None, :]

    def refine(self) -> "Grid":
        """Same extent, half the spacing."""
        return Grid(self.extent, 2 * self.n - 1, self.shifted)


def make_grid(extent_R: float, n: int) -> Grid:
    return Grid(float(extent_R), int(n))


@dataclass
class ScalarField3:
    grid: Grid
    values: np.ndarray
    # cells from each face affected by one-sided stencils
    boundary_layer: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"expected shape {self.grid.shape}, got {self.values.shape}")

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def __add__(self, other):
        return ScalarField3(self.grid, self.values + _vals(other), _layer(self, other))

    def __sub__(self, other):
        return ScalarField3(self.grid, self.values - _vals(other), _layer(self, other))

    def __mul__(self, c):
        return ScalarField3(self.grid, self.values * c, self.boundary_layer)

    __rmul__ = __mul__


@dataclass
class VectorField3:
    grid: Grid
    values: np.ndarray
    boundary_layer: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (3,) + self.grid.shape:
            raise ValueError(f"expected shape {(3,) + self.grid.shape}, got {self.values.shape}")

    @classmethod
    def from_components(cls, comps) -> "VectorField3":
        comps = list(comps)
        grid = comps[0].grid
        if any(c.grid != grid for c in comps):
            raise ValueError("components live on different grids")
        return cls(grid, np.stack([c.values for c in comps]), max(c.boundary_layer for c in comps))

    def component(self, i: int) -> ScalarField3:
        return ScalarField3(self.grid, self.values[i], self.boundary_layer)

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def __add__(self, other):
        return VectorField3(self.grid, self.values + _vals(other), _layer(self, other))

    def __sub__(self, other):
        return VectorField3(self.grid, self.values - _vals(other), _layer(self, other))

    def __mul__(self, c):
        return VectorField3(self.grid, self.values * c, self.boundary_layer)

    __rmul__ = __mul__


def _vals(x):
    return x.values if hasattr(x, "values") else x


def _layer(a, b):
    return max(a.boundary_layer, getattr(b, "boundary_layer", 0))


# ---------------------------------------------------------------------------
# finite differences on raw arrays (spatial axes are the last three)


def d1(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    """First derivative, centred inside, one-sided second order at the faces."""
    a = np.moveaxis(a, axis, -1)
    out = np.empty_like(a)
    out[..., 1:-1] = (a[..., 2:] - a[..., :-2]) / (2.0 * h)
    out[..., 0] = (-3.0 * a[..., 0] + 4.0 * a[..., 1] - a[..., 2]) / (2.0 * h)
    out[..., -1] = (3.0 * a[..., -1] - 4.0 * a[..., -2] + a[..., -3]) / (2.0 * h)
    return np.moveaxis(out, -1, axis)


def d2(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Second derivative, centred inside, one-sided second order at the faces."""
    a = np.moveaxis(a, axis, -1)
    out = np.empty_like(a)
    out[..., 1:-1] = (a[..., 2:] - 2.0 * a[..., 1:-1] + a[..., :-2]) / (h * h)
    out[..., 0] = (2.0 * a[..., 0] - 5.0 * a[..., 1] + 4.0 * a[..., 2] - a[..., 3]) / (h * h)
    out[..., -1] = (2.0 * a[..., -1] - 5.0 * a[..., -2] + 4.0 * a[..., -3] - a[..., -4]) / (h * h)
    return np.moveaxis(out, -1, axis)


def dn(a: np.ndarray, axis: int, order: int, h: float) -> np.ndarray:
    """Derivative of order 0..4 along one spatial axis (0, 1, 2 counted from the first spatial axis)."""
    ax = axis - 3
    if order == 0:
        return a
    if order == 1:
        return d1(a, ax, h)
    if order == 2:
        return d2(a, ax, h)
    if order == 3:
        return d1(d2(a, ax, h), ax, h)
    if order == 4:
        return d2(d2(a, ax, h), ax, h)
    raise ValueError(f"derivative order {order} not supported (max 4)")


def partial(a: np.ndarray, gamma, h: float) -> np.ndarray:
    """Mixed derivative D^gamma of an array whose last three axes are spatial."""
    gamma = tuple(int(g) for g in gamma)
    if len(gamma) != 3 or min(gamma) < 0 or sum(gamma) > 4:
        raise ValueError(f"multi-index must have 3 non-negative entries with |gamma| <= 4, got {gamma}")
    out = a
    for ax, g in enumerate(gamma):
        out = dn(out, ax, g, h)
    return out


def gradient(a: np.ndarray, h: float) -> np.ndarray:
    """Stack of the three first partials along a new leading axis."""
    return np.stack([d1(a, ax, h) for ax in (-3, -2, -1)])


def multi_indices(order: int):
    """All 3-component multi-indices with |gamma| <= order, lowest order first."""
    out = []
    for total in range(order + 1):
        for g in itertools.product(range(total + 1), repeat=3):
            if sum(g) == total:
                out.append(g)
    return out


def fd_derivative(f: ScalarField3, gamma) -> ScalarField3:
    gamma = tuple(int(g) for g in gamma)
    vals = partial(f.values, gamma, f.grid.h)
    return ScalarField3(f.grid, vals, f.boundary_layer + max(gamma))


def curl(v: VectorField3) -> VectorField3:
    return VectorField3(v.grid, curl_array(v.values, v.grid.h), v.boundary_layer + 1)


def curl_array(v: np.ndarray, h: float) -> np.ndarray:
    d = lambda comp, ax: d1(v[comp], ax - 3, h)  # noqa: E731
    return np.stack(
        [
            d(2, 1) - d(1, 2),
            d(0, 2) - d(2, 0),
            d(1, 0) - d(0, 1),
        ]
    )


def divergence(v: VectorField3) -> ScalarField3:
    return ScalarField3(v.grid, divergence_array(v.values, v.grid.h), v.boundary_layer + 1)


def divergence_array(v: np.ndarray, h: float) -> np.ndarray:
    return d1(v[0], -3, h) + d1(v[1], -2, h) + d1(v[2], -1, h)


# ---------------------------------------------------------------------------
# norms


@dataclass(frozen=True)
class NormKind:
    """Which discrete norm to take.

    ``C``: max over nodes and |gamma| <= m of |D^gamma f|.
    ``H``: trapezoid L2 of all D^gamma f with |gamma| <= m.
    ``HC``: H + C, the H^m cap C^m norm.
    ``decay``: max over |x| >= 1 of |f| (1 + |x|^order).
    """

    tag: str
    value: float

    def __post_init__(self):
        if self.tag in ("C", "H", "HC"):
            if int(self.value) != self.value or not 0 <= self.value <= 3:
                raise ValueError(f"norm order must be in 0..3, got {self.value}")
        elif self.tag == "decay":
            if not self.value > 0:
                raise ValueError("decay order must be positive")
        else:
            raise ValueError(f"unknown norm tag {self.tag!r}")

    @classmethod
    def C(cls, m: int) -> "NormKind":
        return cls("C", m)

    @classmethod
    def H(cls, m: int) -> "NormKind":
        return cls("H", m)

    @classmethod
    def HC(cls, m: int) -> "NormKind":
        return cls("HC", m)

    @classmethod
    def decay(cls, order: float) -> "NormKind":
        return cls("decay", order)

    @property
    def label(self) -> str:
        if self.tag == "decay":
            return f"decay{self.value:g}"
        return f"{self.tag}{int(self.value)}"


def _mask(grid: Grid, exclude_origin: float | None, layer: int | None) -> np.ndarray | None:
    mask = None
    if exclude_origin:
        mask = grid.radius >= exclude_origin
    if layer:
        inner = np.zeros(grid.shape, dtype=bool)
        s = slice(layer, grid.n - layer)
        inner[s, s, s] = True
        mask = inner if mask is None else (mask & inner)
    return mask


def norm_array(
    values: np.ndarray,
    grid: Grid,
    kind: NormKind,
    exclude_origin: float | None = None,
    exclude_boundary: int | None = None,
) -> float:
    """Discrete norm of a scalar (n,n,n) or stacked (..., n,n,n) array.

    ``exclude_origin`` drops nodes with |x| below the given radius;
    ``exclude_boundary`` drops that many layers of nodes at every face.
    Stacked arrays are treated component-wise: max for sup-type norms,
    sum of squares for H norms.
    """
    vals = np.asarray(values, dtype=np.float64)
    stack = vals.reshape((-1,) + grid.shape)
    mask = _mask(grid, exclude_origin, exclude_boundary)

    if kind.tag == "decay":
        r = grid.radius
        weight = 1.0 + r**kind.value
        sel = r >= 1.0
        if mask is not None:
            sel = sel & mask
        if not sel.any():
            return 0.0
        return float(np.max(np.abs(stack[:, sel]) * weight[sel]))

    m = int(kind.value)
    cmax = 0.0
    hsum = 0.0
    w = grid.trapezoid_weights()
    if mask is not None:
        w = w * mask
    for gamma in multi_indices(m):
        der = partial(stack, gamma, grid.h)
        if kind.tag in ("C", "HC"):
            sel = der if mask is None else der[:, mask]
            cmax = max(cmax, float(np.max(np.abs(sel))) if sel.size else 0.0)
        if kind.tag in ("H", "HC"):
            hsum += float(np.sum(der * der * w))
    if kind.tag == "C":
        return cmax
    if kind.tag == "H":
        return float(np.sqrt(hsum))
    return cmax + float(np.sqrt(hsum))


def discrete_norm(
    f: ScalarField3 | VectorField3,
    kind: NormKind,
    exclude_origin: float | None = None,
    exclude_boundary: bool = False,
) -> float:
    layer = None
    if exclude_boundary:
        order = 0 if kind.tag == "decay" else int(kind.value)
        layer = max(2, f.boundary_layer + order)
    return norm_array(f.values, f.grid, kind, exclude_origin, layer)


# ---------------------------------------------------------------------------
# snapshots: raw little-endian float64, x fastest, plus a key=value sidecar


@dataclass
class SnapshotHeader:
    extent: float
    n: int
    shift: float
    components: list[str]
    time: float = 0.0
    nu: float = 0.0
    extra: dict = field(default_factory=dict)


def write_snapshot(path, f: ScalarField3 | VectorField3, names=None, time=0.0, nu=0.0) -> Path:
    path = Path(path)
    vals = f.values.reshape((-1,) + f.grid.shape)
    if names is None:
        names = ["f"] if vals.shape[0] == 1 else [f"v{i + 1}" for i in range(vals.shape[0])]
    with open(path, "wb") as fh:
        for comp in vals:
            fh.write(np.ascontiguousarray(comp.transpose(2, 1, 0)).astype("<f8").tobytes())
    header = path.with_suffix(path.suffix + ".hdr")
    header.write_text(
        "\n".join(
            [
                f"R={f.grid.extent!r}",
                f"n={f.grid.n}",
                f"shift={f.grid.shift!r}",
                f"components={','.join(names)}",
                f"time={time!r}",
                f"nu={nu!r}",
            ]
        )
        + "\n"
    )
    return path


def read_snapshot(path) -> tuple[ScalarField3 | VectorField3, SnapshotHeader]:
    path = Path(path)
    meta = {}
    for line in path.with_suffix(path.suffix + ".hdr").read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            meta[k.strip()] = v.strip()
    hdr = SnapshotHeader(
        extent=float(meta["R"]),
        n=int(meta["n"]),
        shift=float(meta["shift"]),
        components=meta["components"].split(","),
        time=float(meta.get("time", 0.0)),
        nu=float(meta.get("nu", 0.0)),
    )
    grid = Grid(hdr.extent, hdr.n, shifted=hdr.shift != 0.0)
    raw = np.fromfile(path, dtype="<f8")
    ncomp = len(hdr.components)
    comps = raw.reshape(ncomp, hdr.n, hdr.n, hdr.n).transpose(0, 3, 2, 1)
    if ncomp == 1:
        return ScalarField3(grid, comps[0].copy()), hdr
    return VectorField3(grid, comps.copy()), hdr
