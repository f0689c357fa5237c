"""Convergence studies and oracle comparisons shared by the test-suite and scripts."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adjoint import TerminalData, characteristic_eval, solve_adjoint
from .coefficients import DegeneracyModel, eval_k
from .forward import RatePack
from .mesh import TensorGrid
from .scheme import CascadeScheme


def _w(x):
    return x * (1 - x) * np.sin(np.pi * x)


def _w2(x):
    # second derivative of x(1-x) sin(pi x)
    s, c = np.sin(np.pi * x), np.cos(np.pi * x)
    return -2 * s + 2 * np.pi * (1 - 2 * x) * c - np.pi ** 2 * x * (1 - x) * s


def manufactured(grid: TensorGrid):
    """u* = exp(-t-a) x(1-x) sin(pi x) on all lattice nodes, shape (Nt+1, Na+1, Nx+1)."""
    t, a, x = grid.t, grid.a, grid.x
    return np.exp(-t[:, None, None] - a[None, :, None]) * _w(x)[None, None, :]


def manufactured_run(Na: int, Nx: int, k: DegeneracyModel, mu: float = 0.1, T: float = 1.0, A: float = 1.0):
    """Discrete solution of the u equation with the residual of u* injected (beta = 0).

    The age-zero inflow e^{-t} w(x) enters through the renewal hook.
    """
    grid = TensorGrid.aligned_grid(T, A, Na, Nx)
    rates = RatePack(grid, mu, mu, 0.0, 0.0, 0.0, 0.5 * min(T, A), 0.5 * min(T, A))
    x = grid.x
    ustar = manufactured(grid)
    kx = eval_k(k, x)
    e = np.exp(-grid.t[:, None, None] - grid.a[None, :, None])
    f = (mu - 2.0) * ustar - kx[None, None, :] * e * _w2(x)[None, None, :]
    f[..., 0] = f[..., -1] = 0.0
    inflow = np.exp(-grid.t)[:, None] * _w(x)[None, :]
    sch = CascadeScheme(grid, k, k, rates)
    u = sch.march(1, ustar[0], 0, grid.Nt, source=f, inflow=inflow)
    return grid, u, ustar


@dataclass
class OrderStudy:
    resolutions: list
    differences: list
    exact_errors: list

    @property
    def order(self):
        """Self-convergence order from three grids."""
        d1, d2 = self.differences
        return float(np.log2(d1 / d2))

    @property
    def exact_orders(self):
        e = self.exact_errors
        return [float(np.log2(e[i] / e[i + 1])) for i in range(len(e) - 1)]


def _final_on(u_fine, grid_f, grid_c, x_min):
    """Final slice of a finer run sampled on the coarse (a, x) nodes with x >= x_min."""
    ra = grid_f.Na // grid_c.Na
    rx = grid_f.Nx // grid_c.Nx
    s = u_fine[-1][::ra, ::rx]
    return s[:, grid_c.x >= x_min - 1e-12]


def time_order(k, Na_list=(20, 40, 80), Nx=128, x_min=0.1):
    runs = [manufactured_run(Na, Nx, k) for Na in Na_list]
    return _study(runs, x_min, list(Na_list))


def space_order(k, Nx_list=(16, 32, 64), Na=40, x_min=0.1):
    runs = [manufactured_run(Na, Nx, k) for Nx in Nx_list]
    return _study(runs, x_min, list(Nx_list))


def _study(runs, x_min, res):
    gc = runs[0][0]
    sl = [_final_on(u, g, gc, x_min) for g, u, _ in runs]
    diffs = [float(np.sqrt(np.mean((sl[i] - sl[i + 1]) ** 2))) for i in range(2)]
    exact = []
    for g, u, us in runs:
        m = g.x >= x_min - 1e-12
        exact.append(float(np.sqrt(np.mean((u[-1][:, m] - us[-1][:, m]) ** 2))))
    return OrderStudy(res, diffs, exact)


def characteristic_comparison(rates: RatePack, k1, k2, terminal: TerminalData, propagator="euler"):
    """Relative L2 distance between the PDE adjoint y and the along-characteristic oracle.

    Every (t, a) node where the oracle is valid takes part.
    """
    grid = rates.grid
    adj = solve_adjoint(terminal, rates, k1, k2)
    num = den = 0.0
    count = 0
    for n in range(grid.Nt + 1):
        for j in range(grid.Na + 1):
            try:
                prof = characteristic_eval(terminal.y, rates, k2, n * grid.dt, j * grid.da,
                                           propagator=propagator)
            except ValueError:
                continue
            ref = adj.y.values[n, j]
            num += float(np.sum((prof - ref) ** 2))
            den += float(np.sum(ref ** 2))
            count += 1
    return (float(np.sqrt(num / den)) if den > 0 else 0.0), count
