"""Manufactured smooth solution for end-to-end checks of the Picard pipeline.

The exact field is v*(t, x) = c(t) u(x) with u a sum of rotating Gaussian
blobs, u = sum_a (omega_a x (x - x_a)) exp(-|x - x_a|^2 / w^2).  Each blob is
divergence-free.  All derivatives needed by the forcing are closed-form except
the Leray term, which comes from the spectral Poisson oracle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convolution import poisson_gradient_oracle
from .fields import Grid, VectorField3

DEFAULT_BLOBS = (
    ((0.4, 0.0, -0.3), (0.0, 0.0, 1.0)),
    ((-0.4, 0.3, 0.3), (1.0, 0.5, 0.0)),
)


def _skew(a) -> np.ndarray:
    # matrix of y -> a x y
    a1, a2, a3 = a
    return np.array([[0.0, -a3, a2], [a3, 0.0, -a1], [-a2, a1, 0.0]])


@dataclass(frozen=True)
class ManufacturedSolution:
    width: float = 1.4
    blobs: tuple = DEFAULT_BLOBS
    growth: float = 1.0  # c(t) = 1 + growth * t

    def c(self, t: float) -> float:
        return 1.0 + self.growth * t

    def dc(self, t: float) -> float:
        return self.growth

    def _terms(self, grid: Grid):
        x = np.stack(grid.mesh())
        for centre, axis in self.blobs:
            y = x - np.asarray(centre, dtype=float)[:, None, None, None]
            psi = np.exp(-np.sum(y * y, axis=0) / self.width**2)
            yield _skew(axis), y, psi

    def u(self, grid: Grid) -> np.ndarray:
        out = np.zeros((3,) + grid.shape)
        for A, y, psi in self._terms(grid):
            out += np.einsum("ij,j...->i...", A, y) * psi
        return out

    def grad_u(self, grid: Grid) -> np.ndarray:
        """g[i, j] = d_j u_i."""
        w2 = self.width**2
        out = np.zeros((3, 3) + grid.shape)
        for A, y, psi in self._terms(grid):
            ay = np.einsum("ij,j...->i...", A, y)
            out += (A[:, :, None, None, None] - 2.0 * ay[:, None] * y[None, :] / w2) * psi
        return out

    def laplacian_u(self, grid: Grid) -> np.ndarray:
        w2 = self.width**2
        out = np.zeros((3,) + grid.shape)
        for A, y, psi in self._terms(grid):
            ay = np.einsum("ij,j...->i...", A, y)
            r2 = np.sum(y * y, axis=0)
            out += ay * (4.0 * r2 / w2**2 - 10.0 / w2) * psi
        return out

    def velocity(self, grid: Grid, t: float) -> VectorField3:
        return VectorField3(grid, self.c(t) * self.u(grid))

    def burgers(self, grid: Grid) -> np.ndarray:
        return np.einsum("j...,ij...->i...", self.u(grid), self.grad_u(grid))

    def leray(self, grid: Grid, pad: int = 2) -> np.ndarray:
        g = self.grad_u(grid)
        src = np.einsum("mj...,jm...->...", g, g)
        return poisson_gradient_oracle(src, grid, pad)

    def forcing(self, grid: Grid, times, nu: float, sign_burgers: float = 1.0, sign_leray: float = -1.0) -> np.ndarray:
        """F = v*_t - nu Lap v* - sB B(v*) - sL L(v*) on every slice time."""
        u, lap, b, lt = self.u(grid), self.laplacian_u(grid), self.burgers(grid), self.leray(grid)
        out = np.empty((len(times), 3) + grid.shape)
        for l, t in enumerate(times):
            c = self.c(t)
            out[l] = self.dc(t) * u - nu * c * lap - c * c * (sign_burgers * b + sign_leray * lt)
        return out

    def exact_slab(self, grid: Grid, times) -> np.ndarray:
        u = self.u(grid)
        return np.stack([self.c(t) * u for t in times])


@dataclass
class ConvergenceStudy:
    hs: list
    errors: list  # max-norm error of v^K over all slices, relative to max |v*|
    order: float


def convergence_study(
    ns=(17, 25, 33),
    R: float = 5.0,
    T: float = 0.5,
    nu: float = 0.1,
    K_max: int = 8,
    signs=None,
    solution: ManufacturedSolution | None = None,
) -> ConvergenceStudy:
    """Run the forced Picard pipeline on refining grids with dt proportional to h.

    The forcing is built for the default signs; ``signs`` only changes the
    scheme, so a flipped sign shows up as an O(1) error.
    """
    from .iteration import IterationConfig, SignPack, run_picard

    ms = solution or ManufacturedSolution()
    signs = signs or SignPack()
    hs, errs = [], []
    for n in ns:
        grid = Grid(R, n)
        steps = (n - 1) // 2
        times = np.linspace(0.0, T, steps + 1)
        cfg = IterationConfig(
            nu=nu, T=T, n_steps=steps, K_max=K_max, grid=grid, signs=signs,
            initial=ms.velocity(grid, 0.0), forcing=ms.forcing(grid, times, nu),
        )
        tr = run_picard(cfg)
        exact = ms.exact_slab(grid, times)
        errs.append(float(np.max(np.abs(tr.velocity(tr.K) - exact)) / np.max(np.abs(exact))))
        hs.append(grid.h)
    order = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    return ConvergenceStudy(hs, errs, order)
