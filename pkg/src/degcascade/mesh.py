"""The (t, a, x) lattice and the 1/k-weighted quadratures used everywhere.

Two quadratures coexist:

* ``weighted_l2`` / ``cylinder_integral``: trapezoid in a (and t), midpoint in
  x.  Used for reported norms.  Never evaluates 1/k at a grid endpoint.
* ``pairing``: the discrete energy inner product of the solvers (rectangle
  rule over ages a_1..a_Na, nodal sum over interior x with dual-cell weights).
  The forward and adjoint schemes are exact transposes in this pairing.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .coefficients import DegeneracyModel, eval_k


@dataclass(frozen=True)
class TensorGrid:
    T: float
    A: float
    Nt: int
    Na: int
    Nx: int
    aligned: bool = True
    grading: float = 1.0

    def __post_init__(self):
        if min(self.Nt, self.Na, self.Nx) < 4:
            raise ValueError("Nt, Na, Nx must all be >= 4")
        if self.T <= 0 or self.A <= 0:
            raise ValueError("T and A must be positive")
        if self.grading <= 0:
            raise ValueError("grading exponent must be positive")
        # Nt*A == Na*T  <=>  T/Nt == A/Na; compared on the integers to avoid rounding
        if self.aligned and not np.isclose(self.Nt * self.A, self.Na * self.T, rtol=0, atol=1e-12):
            raise ValueError(f"grid not aligned: T/Nt={self.T / self.Nt} != A/Na={self.A / self.Na}")

    @classmethod
    def aligned_grid(cls, T, A, Na, Nx, grading=1.0):
        Nt = T * Na / A
        if abs(Nt - round(Nt)) > 1e-9:
            raise ValueError("T*Na/A must be an integer for an aligned grid")
        return cls(T, A, int(round(Nt)), Na, Nx, True, grading)

    @property
    def dt(self):
        return self.T / self.Nt

    @property
    def da(self):
        # exactly dt on aligned grids
        return self.dt if self.aligned else self.A / self.Na

    @property
    def dx(self):
        return 1.0 / self.Nx

    @property
    def t(self):
        return np.linspace(0.0, self.T, self.Nt + 1)

    @property
    def a(self):
        return np.arange(self.Na + 1) * self.da

    @property
    def x(self):
        s = np.linspace(0.0, 1.0, self.Nx + 1)
        return s if self.grading == 1.0 else s ** self.grading

    @property
    def x_mid(self):
        x = self.x
        return 0.5 * (x[1:] + x[:-1])

    @property
    def h(self):
        return np.diff(self.x)

    @property
    def dual(self):
        """Dual-cell lengths of the interior x nodes."""
        h = self.h
        return 0.5 * (h[1:] + h[:-1])

    def refine(self, factor=2):
        return replace(self, Nt=self.Nt * factor, Na=self.Na * factor, Nx=self.Nx * factor)

    def time_index(self, t, tol=1e-9):
        n = t / self.dt
        if abs(n - round(n)) > tol:
            raise ValueError(f"t={t} is not a time node")
        return int(round(n))

    def age_index(self, a, tol=1e-9):
        j = a / self.da
        if abs(j - round(j)) > tol:
            raise ValueError(f"a={a} is not an age node")
        return int(round(j))

    def to_dict(self):
        return {"T": self.T, "A": self.A, "Nt": self.Nt, "Na": self.Na, "Nx": self.Nx,
                "aligned": self.aligned, "grading": self.grading}


@dataclass(frozen=True)
class Region:
    """Closed box [a0, a1] x [x0, x1] in (age, space)."""
    a: tuple = (0.0, np.inf)
    x: tuple = (0.0, 1.0)

    def __post_init__(self):
        if self.a[0] > self.a[1] or self.x[0] > self.x[1]:
            raise ValueError("empty region")

    def intersect(self, other: "Region") -> "Region":
        a = (max(self.a[0], other.a[0]), min(self.a[1], other.a[1]))
        x = (max(self.x[0], other.x[0]), min(self.x[1], other.x[1]))
        if a[0] > a[1] or x[0] > x[1]:
            raise ValueError("regions do not intersect")
        return Region(a, x)


FULL = Region()


@dataclass
class Field:
    """Grid function on (a, x) nodes, optionally restricted to a region.

    ``values`` keeps the raw nodal data; the region is applied at the
    quadrature points by ``weighted_l2`` and at the nodes by ``masked``.
    """
    grid: TensorGrid
    values: np.ndarray
    region: Region | None = None

    def masked(self):
        if self.region is None:
            return self.values
        return self.values * node_mask(self.grid, self.region)


def _as_field(f, grid):
    if isinstance(f, Field):
        return f
    return Field(grid, np.asarray(f, dtype=float))


def node_mask(grid: TensorGrid, region: Region):
    a, x = grid.a, grid.x
    ma = (a >= region.a[0] - 1e-12) & (a <= region.a[1] + 1e-12)
    mx = (x >= region.x[0] - 1e-12) & (x <= region.x[1] + 1e-12)
    return np.outer(ma, mx).astype(float)


def restrict(f, grid: TensorGrid, region: Region) -> Field:
    f = _as_field(f, grid)
    reg = region if f.region is None else f.region.intersect(region)
    return Field(grid, f.values, reg)


def hat_weights(nodes, lo, hi):
    """Integrals over [lo, hi] of the piecewise-linear hat functions on ``nodes``.

    Integrating the linear interpolant of nodal data over [lo, hi]; for the
    full node range this is the composite trapezoid rule.
    """
    nodes = np.asarray(nodes, dtype=float)
    lo = max(lo, nodes[0])
    hi = min(hi, nodes[-1])
    w = np.zeros_like(nodes)
    if hi <= lo:
        return w
    for i in range(len(nodes) - 1):
        l, r = nodes[i], nodes[i + 1]
        c0, c1 = max(l, lo), min(r, hi)
        if c1 <= c0:
            continue
        h = r - l
        # integrals of (r - s)/h and (s - l)/h over [c0, c1]
        w[i] += ((r - c0) ** 2 - (r - c1) ** 2) / (2 * h)
        w[i + 1] += ((c1 - l) ** 2 - (c0 - l) ** 2) / (2 * h)
    return w


def _cell_fractions(edges, lo, hi):
    left, right = edges[:-1], edges[1:]
    overlap = np.clip(np.minimum(right, hi) - np.maximum(left, lo), 0.0, None)
    return overlap / (right - left)


def inverse_k_mid(grid: TensorGrid, k: DegeneracyModel):
    return 1.0 / eval_k(k, grid.x_mid)


def weighted_l2(f, grid: TensorGrid, k: DegeneracyModel, region: Region | None = None) -> float:
    """Approximate the double integral of f^2/k over a region of (0,A)x(0,1).

    Trapezoid in a (hat functions clipped to the region), midpoint in x
    (the field is linearly interpolated to cell midpoints, cells weighted by
    their overlap with the region).  Second order for smooth f^2/k.
    """
    f = _as_field(f, grid)
    reg = FULL if region is None else region
    if f.region is not None:
        reg = reg.intersect(f.region)
    if reg.a[1] < reg.a[0] or reg.x[1] < reg.x[0]:
        raise ValueError("empty region")
    vals = f.values
    mid = 0.5 * (vals[..., 1:] + vals[..., :-1])
    wx = grid.h * _cell_fractions(grid.x, *reg.x) * inverse_k_mid(grid, k)
    wa = hat_weights(grid.a, *reg.a)
    return float(wa @ (mid ** 2) @ wx)


def cylinder_integral(traj, grid: TensorGrid, k: DegeneracyModel, window=(0.0, None),
                      region: Region | None = None, times=None) -> float:
    """Time integral (trapezoid, hat-clipped to the window) of weighted_l2 slices.

    ``traj`` has shape (levels, Na+1, Nx+1); ``times`` defaults to the grid
    times of those levels starting at t=0.
    """
    traj = np.asarray(traj, dtype=float)
    t0, t1 = window
    t1 = grid.T if t1 is None else t1
    if t0 < -1e-12 or t1 > grid.T + 1e-12:
        raise ValueError("time window outside [0, T]")
    if times is None:
        times = np.arange(traj.shape[0]) * grid.dt
    if t1 <= t0:
        return 0.0
    wt = hat_weights(times, t0, t1)
    total = 0.0
    for n in np.nonzero(wt)[0]:
        total += wt[n] * weighted_l2(traj[n], grid, k, region)
    return float(total)


def hardy_ratio(w, x=None) -> float:
    """Midpoint quotient of int w^2/x^2 over int (w')^2 for a profile vanishing at 0 and 1."""
    w = np.asarray(w, dtype=float)
    if x is None:
        x = np.linspace(0.0, 1.0, w.size)
    if abs(w[0]) > 1e-14 or abs(w[-1]) > 1e-14:
        raise ValueError("profile must vanish at both endpoints")
    h = np.diff(x)
    xm = 0.5 * (x[1:] + x[:-1])
    wm = 0.5 * (w[1:] + w[:-1])
    wx = np.diff(w) / h
    den = float(np.sum(wx ** 2 * h))
    if den == 0.0:
        raise ValueError("degenerate input: zero gradient energy")
    return float(np.sum((wm / xm) ** 2 * h)) / den


def node_weights(grid: TensorGrid, k: DegeneracyModel):
    """Interior-node weights dual_i / k(x_i) of the energy pairing."""
    return grid.dual / eval_k(k, grid.x[1:-1])


def pairing(f, g, grid: TensorGrid, k: DegeneracyModel, weights=None) -> float:
    """Energy inner product of two slices: sum over rows 1..Na and interior x."""
    w = node_weights(grid, k) if weights is None else weights
    f = np.asarray(f)[..., 1:, 1:-1]
    g = np.asarray(g)[..., 1:, 1:-1]
    return float(grid.da * np.sum(f * g * w))


def energy(f, grid: TensorGrid, k: DegeneracyModel, weights=None) -> float:
    return pairing(f, f, grid, k, weights)


def field_to_csv(path, traj, grid: TensorGrid, times=None):
    """Write a slice (Na+1, Nx+1) or trajectory (levels, Na+1, Nx+1) as t,a,x,value rows."""
    traj = np.asarray(traj, dtype=float)
    if traj.ndim == 2:
        traj = traj[None]
        times = [0.0] if times is None else times
    if times is None:
        times = np.arange(traj.shape[0]) * grid.dt
    a, x = grid.a, grid.x
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "a", "x", "value"])
        for n, t in enumerate(times):
            for j in range(a.size):
                for i in range(x.size):
                    wr.writerow([f"{t:.12g}", f"{a[j]:.12g}", f"{x[i]:.12g}", f"{traj[n, j, i]:.17g}"])


def field_from_csv(path, grid: TensorGrid):
    """Read a single slice written with columns t,a,x,value (first time only)."""
    out = np.zeros((grid.Na + 1, grid.Nx + 1))
    a, x = grid.a, grid.x
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        t_first = None
        for row in rd:
            t = float(row["t"])
            t_first = t if t_first is None else t_first
            if t != t_first:
                break
            j = int(np.argmin(np.abs(a - float(row["a"]))))
            i = int(np.argmin(np.abs(x - float(row["x"]))))
            out[j, i] = float(row["value"])
    return out
