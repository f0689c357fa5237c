"""Characteristic-aligned marching scheme shared by the forward and adjoint solvers.

With dt == da a forward step from level n-1 to n is

    shift:    row j <- row j-1 of level n-1 (row 0 holds the renewal trace)
    diffuse:  (I + dt(-k D2 + mu_n)) u = shifted     (backward Euler, per age row)
    source:   u += dt * source_n
    renewal:  row 0 <- sum_j rho_j u_j  (+ optional inflow)

which is  U^n = M_n^{-1} P U^{n-1} + dt G^n  on rows 1..Na.  M_n is
self-adjoint in the 1/k-weighted pairing, so the adjoint step is

    Zhat = M_n^{-1} Z^n,    Z^{n-1} = P^* Zhat + dt H^{n-1},

where P^* shifts rows up (zero enters at a = A) and adds rho_j * Zhat_1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg.lapack import dgttrf, dgttrs

from .coefficients import DegeneracyModel, eval_k
from .mesh import TensorGrid, node_weights


@dataclass
class Trajectory:
    """Levels start..start+L of one population on the full (a, x) node set."""
    grid: TensorGrid
    start: int
    values: np.ndarray

    @property
    def levels(self):
        return self.values.shape[0]

    @property
    def stop(self):
        return self.start + self.levels - 1

    @property
    def times(self):
        return (self.start + np.arange(self.levels)) * self.grid.dt

    def level(self, n):
        """Slice at global time index n."""
        if not self.start <= n <= self.stop:
            raise IndexError(f"level {n} outside [{self.start}, {self.stop}]")
        return self.values[n - self.start]

    def at_time(self, t):
        """Slice at time t, linear in t between levels."""
        s = t / self.grid.dt - self.start
        if s < -1e-9 or s > self.levels - 1 + 1e-9:
            raise ValueError(f"t={t} outside the trajectory window")
        m = int(np.clip(np.floor(s + 1e-9), 0, self.levels - 1))
        frac = s - m
        if m == self.levels - 1 or abs(frac) < 1e-9:
            return self.values[m]
        return (1 - frac) * self.values[m] + frac * self.values[m + 1]


def trapezoid_age_weights(grid: TensorGrid):
    c = np.full(grid.Na + 1, grid.da)
    c[0] = c[-1] = 0.5 * grid.da
    return c


class CascadeScheme:
    """Factorized operators and marching loops for the two populations.

    Equation 1 uses (k1, mu11, beta1); equation 2 uses (k2, mu22, beta2).
    """

    def __init__(self, grid: TensorGrid, k1: DegeneracyModel, k2: DegeneracyModel, rates):
        if not grid.aligned:
            raise ValueError("solver grids must satisfy dt == da")
        if rates.grid != grid:
            raise ValueError("rate pack was built on a different grid")
        self.grid, self.k = grid, {1: k1, 2: k2}
        self.rates = rates
        xi = grid.x[1:-1]
        self.kx = {1: eval_k(k1, xi), 2: eval_k(k2, xi)}
        self.w = {1: node_weights(grid, k1), 2: node_weights(grid, k2)}
        # coupling mu21 * u in the v equation transposes to mu21 * (k1/k2) * y in the z equation
        self.k_ratio = self.kx[1] / self.kx[2]
        c = trapezoid_age_weights(grid)
        self.rho = {}
        for e, beta in ((1, rates.beta1), (2, rates.beta2)):
            b = np.asarray(beta)[:, 1:-1]
            denom = 1.0 - c[0] * b[0]
            if np.any(denom <= 0):
                raise ValueError("renewal closure singular: c_0 * beta(0, x) >= 1")
            self.rho[e] = c[1:, None] * b[1:] / denom
        self.mu = {1: rates.mu11, 2: rates.mu22}
        self._const_in_time = {e: rates.time_independent(name)
                               for e, name in ((1, "mu11"), (2, "mu22"))}
        self._cache = {}
        h = grid.h
        hl, hr = h[:-1], h[1:]
        self._cl = 2.0 / (hl * (hl + hr))
        self._cr = 2.0 / (hr * (hl + hr))

    # -- operators ------------------------------------------------------------
    def _factors(self, e, n):
        key = (e, 0 if self._const_in_time[e] else n)
        f = self._cache.get(key)
        if f is not None:
            return f
        g = self.grid
        nx = g.Nx - 1
        dt = g.dt
        k = self.kx[e]
        mu = np.asarray(self.mu[e][n])[1:, 1:-1]           # (Na, Nx-1)
        d = 1.0 + dt * (k * (self._cl + self._cr))[None, :] + dt * mu
        lower = -dt * k * self._cl                          # coefficient of u_{i-1} in row i
        upper = -dt * k * self._cr                          # coefficient of u_{i+1} in row i
        dl = np.tile(np.concatenate([lower[1:], [0.0]]), g.Na)[:-1]
        du = np.tile(np.concatenate([upper[:-1], [0.0]]), g.Na)[:-1]
        out = dgttrf(dl, d.ravel(), du)
        if out[-1] != 0:
            raise FloatingPointError("tridiagonal factorization failed")
        f = out[:-1]
        self._cache[key] = f
        self.shape = (g.Na, nx)
        return f

    def solve(self, e, n, rhs):
        """Apply M_n^{-1} to interior rows 1..Na (array of shape (Na, Nx-1))."""
        if not np.all(np.isfinite(rhs)):
            raise FloatingPointError("non-finite input to the implicit step")
        dl, d, du, du2, ipiv = self._factors(e, n)
        x, info = dgttrs(dl, d, du, du2, ipiv, rhs.ravel())
        if info != 0:
            raise FloatingPointError("tridiagonal solve failed")
        return x.reshape(rhs.shape)

    def renewal(self, e, rows):
        """Age-zero trace from interior rows 1..Na."""
        return np.sum(self.rho[e] * rows, axis=0)

    # -- scalar marches -------------------------------------------------------
    def march(self, e, init, n0, n1, source=None, inflow=None):
        """Forward march of equation e over global levels n0..n1.

        ``source`` and ``inflow`` are indexed by relative level (0..n1-n0).
        Returns an array (n1-n0+1, Na+1, Nx+1).  Row 0 of every level, the
        initial one included, is the renewal trace of that level.
        """
        g = self.grid
        L = n1 - n0
        if L < 0 or n0 < 0 or n1 > g.Nt:
            raise ValueError("window outside the time grid")
        init = np.asarray(init, dtype=float)
        if init.shape != (g.Na + 1, g.Nx + 1):
            raise ValueError(f"initial slice must have shape {(g.Na + 1, g.Nx + 1)}")
        if np.any(init[:, 0] != 0) or np.any(init[:, -1] != 0):
            raise ValueError("initial slice must vanish at x = 0 and x = 1")
        out = np.zeros((L + 1, g.Na + 1, g.Nx + 1))
        out[0] = init
        out[0, 0, 1:-1] = self.renewal(e, init[1:, 1:-1])
        if inflow is not None:
            out[0, 0, 1:-1] += inflow[0][1:-1]
        for m in range(1, L + 1):
            sol = self.solve(e, n0 + m, out[m - 1, :-1, 1:-1])
            if source is not None:
                sol += g.dt * source[m][1:, 1:-1]
            out[m, 1:, 1:-1] = sol
            out[m, 0, 1:-1] = self.renewal(e, sol)
            if inflow is not None:
                out[m, 0, 1:-1] += inflow[m][1:-1]
        return out

    def march_adjoint(self, e, terminal, n0, n1, forcing=None):
        """Backward march of the adjoint of equation e from level n1 to n0.

        ``forcing`` is the discrete adjoint load H (relative levels), which
        equals minus the right-hand side of the adjoint equation.  Row 0 of
        level n-1 stores the age-zero trace carried back from level n.
        """
        g = self.grid
        L = n1 - n0
        if L < 0 or n0 < 0 or n1 > g.Nt:
            raise ValueError("window outside the time grid")
        terminal = np.asarray(terminal, dtype=float)
        if terminal.shape != (g.Na + 1, g.Nx + 1):
            raise ValueError(f"terminal slice must have shape {(g.Na + 1, g.Nx + 1)}")
        if np.any(terminal[-1] != 0):
            raise ValueError("terminal data must vanish at a = A")
        if np.any(terminal[:, 0] != 0) or np.any(terminal[:, -1] != 0):
            raise ValueError("terminal data must vanish at x = 0 and x = 1")
        out = np.zeros((L + 1, g.Na + 1, g.Nx + 1))
        lam = terminal[1:, 1:-1].copy()
        if forcing is not None:
            lam += g.dt * forcing[L][1:, 1:-1]
        out[L, 1:, 1:-1] = lam
        out[L, 0] = terminal[0]
        rho = self.rho[e]
        for m in range(L, 0, -1):
            zh = self.solve(e, n0 + m, lam)
            new = np.empty_like(zh)
            new[:-1] = zh[1:]
            new[-1] = 0.0
            new += rho * zh[0]
            if forcing is not None and m - 1 >= 1:
                new += g.dt * forcing[m - 1][1:, 1:-1]
            out[m - 1, 1:, 1:-1] = new
            out[m - 1, 0, 1:-1] = zh[0]
            lam = new
        return out

    # -- cascades -------------------------------------------------------------
    def mu21_slices(self, n0, n1):
        return np.asarray(self.rates.mu21[n0:n1 + 1])

    def forward(self, u0, v0, n0, n1, g=None, fv=None, inflow_u=None, inflow_v=None):
        """u with control source g, then v driven by mu21 * u (plus fv)."""
        u = self.march(1, u0, n0, n1, source=g, inflow=inflow_u)
        src = self.mu21_slices(n0, n1) * u
        if fv is not None:
            src = src + fv
        v = self.march(2, v0, n0, n1, source=src, inflow=inflow_v)
        return u, v

    def adjoint(self, zT, yT, n0, n1, f=None, h=None):
        """y first (source h), then z with the transposed coupling (source f).

        f and h are right-hand sides of the adjoint equations
        z_t + z_a + k1 z_xx - mu11 z + (coupling) = f, and likewise for y.
        """
        y = self.march_adjoint(2, yT, n0, n1, None if h is None else -np.asarray(h))
        load = self.mu21_slices(n0, n1) * y * self._ratio_field()
        if f is not None:
            load = load - np.asarray(f)
        z = self.march_adjoint(1, zT, n0, n1, load)
        return z, y

    def _ratio_field(self):
        r = np.zeros(self.grid.Nx + 1)
        r[1:-1] = self.k_ratio
        return r
