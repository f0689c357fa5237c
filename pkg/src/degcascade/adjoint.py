"""Backward adjoint cascade, the along-characteristic oracle and the discrete duality test."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, solve_banded

from .coefficients import DegeneracyModel, eval_k
from .forward import RatePack, _window_levels
from .mesh import TensorGrid, pairing
from .scheme import CascadeScheme, Trajectory


@dataclass
class TerminalData:
    """Adjoint data (z_T, y_T) at the final time, optionally supported in ages (lo, A)."""
    z: np.ndarray
    y: np.ndarray
    support: tuple | None = None

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.z.shape != self.y.shape or self.z.ndim != 2:
            raise ValueError("z_T and y_T must be (a, x) slices of one shape")

    def validate(self, grid: TensorGrid):
        if self.z.shape != (grid.Na + 1, grid.Nx + 1):
            raise ValueError("terminal data does not match the grid")
        for name in ("z", "y"):
            s = getattr(self, name)
            if np.any(s[-1] != 0):
                raise ValueError(f"{name}_T must vanish at a = A")
            if np.any(s[:, 0] != 0) or np.any(s[:, -1] != 0):
                raise ValueError(f"{name}_T must vanish at x = 0 and x = 1")
            if self.support is not None:
                young = grid.a <= self.support[0] + 1e-12
                if np.any(s[young] != 0):
                    raise ValueError(f"{name}_T must vanish for a <= {self.support[0]}")

    @classmethod
    def zeros(cls, grid, support=None):
        z = np.zeros((grid.Na + 1, grid.Nx + 1))
        return cls(z, z.copy(), support)


@dataclass
class AdjointTrajectory:
    z: Trajectory
    y: Trajectory


def solve_adjoint(terminal: TerminalData, rates: RatePack, k1: DegeneracyModel, k2: DegeneracyModel,
                  f=None, h=None, window=None, scheme: CascadeScheme | None = None) -> AdjointTrajectory:
    """March the adjoint cascade backwards from the end of ``window`` (default (0, T)).

    ``f`` and ``h`` are right-hand sides of the z and y equations on the
    window levels.  The z equation sees y through mu21 * (k1/k2) * y, the
    coupling that makes this solver the exact transpose of the forward one.
    """
    grid = rates.grid
    terminal.validate(grid)
    n0, n1 = _window_levels(grid, window, 0.0)
    L = n1 - n0
    for name, arr in (("f", f), ("h", h)):
        if arr is not None and np.shape(arr) != (L + 1, grid.Na + 1, grid.Nx + 1):
            raise ValueError(f"{name} must have shape {(L + 1, grid.Na + 1, grid.Nx + 1)}")
    sch = scheme or CascadeScheme(grid, k1, k2, rates)
    z, y = sch.adjoint(terminal.z, terminal.y, n0, n1, f=f, h=h)
    return AdjointTrajectory(Trajectory(grid, n0, z), Trajectory(grid, n0, y))


# --------------------------------------------------------------------------- oracle
def _diffusion_bands(grid: TensorGrid, k: DegeneracyModel, mu_row, dt):
    """Banded form of I + dt(-k D2 + mu) on interior nodes (independent build)."""
    x = grid.x
    kk = eval_k(k, x[1:-1])
    hl = x[1:-1] - x[:-2]
    hr = x[2:] - x[1:-1]
    lo = 2.0 * kk / (hl * (hl + hr))
    up = 2.0 * kk / (hr * (hl + hr))
    ab = np.zeros((3, x.size - 2))
    ab[0, 1:] = -dt * up[:-1]
    ab[1] = 1.0 + dt * (lo + up + mu_row)
    ab[2, :-1] = -dt * lo[1:]
    return ab


def _dense(ab):
    n = ab.shape[1]
    return np.diag(ab[1]) + np.diag(ab[0, 1:], 1) + np.diag(ab[2, :-1], -1)


def characteristic_eval(y_terminal, rates: RatePack, k2: DegeneracyModel, t: float, a: float,
                        t_end: float | None = None, propagator: str = "euler"):
    """y(t, a, .) from terminal data by evolving along the characteristic t - a = const.

    Valid where the fertility term cannot act along the path (beta2 = 0 at
    every node visited, which covers t >= T - abar2 + a).  ``propagator``
    selects the backward-Euler semigroup of the lattice (``euler``) or the
    exact exponential of the semi-discrete operator (``exact``).
    """
    grid = rates.grid
    t_end = grid.T if t_end is None else t_end
    if propagator not in ("euler", "exact"):
        raise ValueError("propagator must be 'euler' or 'exact'")
    nt, nT, j = grid.time_index(t), grid.time_index(t_end), grid.age_index(a)
    if not 0 <= nt <= nT or not 0 <= j <= grid.Na:
        raise ValueError("point outside the grid")
    yT = np.asarray(y_terminal, dtype=float)
    steps = nT - nt
    ages = j + np.arange(steps + 1)                     # age row at levels nt..nT
    on_grid = ages <= grid.Na
    if np.any(rates.beta2[ages[on_grid]] != 0):
        raise ValueError("fertility acts along this characteristic; formula not valid here")
    out = np.zeros(grid.Nx + 1)
    if not np.all(on_grid):
        return out                                      # enters through a = A where y vanishes
    prof = yT[ages[-1], 1:-1].copy()
    for s in range(steps, 0, -1):
        n = nt + s
        mu = np.asarray(rates.mu22[n, ages[s], 1:-1], dtype=float)
        ab = _diffusion_bands(grid, k2, mu, grid.dt)
        if propagator == "euler":
            prof = solve_banded((1, 1), ab, prof)
        else:
            gen = (_dense(ab) - np.eye(ab.shape[1])) / grid.dt
            prof = expm(-grid.dt * gen) @ prof
    out[1:-1] = prof
    return out


# --------------------------------------------------------------------------- duality
def _random_slice(rng, grid, kill_last_age=False):
    s = np.zeros((grid.Na + 1, grid.Nx + 1))
    s[:, 1:-1] = rng.standard_normal((grid.Na + 1, grid.Nx - 1))
    if kill_last_age:
        s[-1] = 0.0
    return s


def duality_sides(scheme: CascadeScheme, fwd_in, adj_in, n0, n1):
    """Both sides of the discrete duality identity for given inputs.

    fwd_in = (u0, v0, g, fv); adj_in = (zT, yT, f, h) with f, h right-hand
    sides of the adjoint equations (adjoint load H = -f).
    """
    grid = scheme.grid
    u0, v0, g, fv = fwd_in
    zT, yT, f, h = adj_in
    u, v = scheme.forward(u0, v0, n0, n1, g=g, fv=fv)
    z, y = scheme.adjoint(zT, yT, n0, n1, f=f, h=h)
    w1, w2 = scheme.w[1], scheme.w[2]
    dt = grid.dt
    L = n1 - n0
    lhs = pairing(u[L], zT, grid, None, w1) + pairing(v[L], yT, grid, None, w2)
    rhs = pairing(u[0], z[0], grid, None, w1) + pairing(v[0], y[0], grid, None, w2)
    for m in range(1, L + 1):
        if f is not None:
            lhs -= dt * pairing(u[m], f[m], grid, None, w1)
        if h is not None:
            lhs -= dt * pairing(v[m], h[m], grid, None, w2)
        if g is not None:
            rhs += dt * pairing(g[m], z[m], grid, None, w1)
        if fv is not None:
            rhs += dt * pairing(fv[m], y[m], grid, None, w2)
    return lhs, rhs


def transpose_check(rates: RatePack, k1: DegeneracyModel, k2: DegeneracyModel, window=None,
                    trials: int = 10, coupled: bool = True, seed: int = 0, zero: bool = False) -> float:
    """Max relative discrepancy of the discrete forward/adjoint duality over random inputs."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    grid = rates.grid
    if not coupled:
        rates = rates.replace(mu21=0.0)
    sch = CascadeScheme(grid, k1, k2, rates)
    n0, n1 = _window_levels(grid, window, 0.0)
    L = n1 - n0
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        def traj():
            return np.stack([_random_slice(rng, grid) for _ in range(L + 1)])
        fwd = (_random_slice(rng, grid), _random_slice(rng, grid), traj(), traj())
        adj = (_random_slice(rng, grid, True), _random_slice(rng, grid, True), traj(), traj())
        if zero:
            fwd = tuple(0 * x for x in fwd)
            adj = tuple(0 * x for x in adj)
        lhs, rhs = duality_sides(sch, fwd, adj, n0, n1)
        scale = max(abs(lhs), abs(rhs))
        if scale > 0:
            worst = max(worst, abs(lhs - rhs) / scale)
    return worst
