"""Both sides of the Carleman and observability estimates on discrete adjoint solutions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adjoint import AdjointTrajectory, TerminalData
from .coefficients import DegeneracyModel, eval_k
from .forward import RatePack
from .mesh import Region, cylinder_integral, weighted_l2
from .scheme import Trajectory
from .weights import CarlemanConfig, weight_product

# lowage-*: with low-age band integrals; delta-*: for data supported in (delta, A)
VARIANTS = ("lowage-y", "lowage-z", "delta-y", "delta-z")


# --------------------------------------------------------------------------- Carleman
@dataclass
class CarlemanSides:
    lhs: float
    rhs_f: float
    rhs_omega: float

    @property
    def ratio(self):
        den = self.rhs_f + self.rhs_omega
        if den == 0:
            return 0.0 if self.lhs == 0 else float("inf")
        return self.lhs / den


def adjoint_forcing(adj: AdjointTrajectory, rates: RatePack, k1: DegeneracyModel,
                    k2: DegeneracyModel, component: str):
    """Right-hand side seen by one component as a scalar degenerate equation.

    y:  -beta2 * y(t, 0, x)
    z:  -mu21 (k1/k2) y - beta1 * z(t, 0, x)   (the coupling of the discrete adjoint)
    Age-zero traces are row 0 of each stored level.
    """
    g = rates.grid
    if component == "y":
        Y = adj.y.values
        return -rates.beta2[None] * Y[:, :1, :]
    if component == "z":
        Z, Y = adj.z.values, adj.y.values
        n0, n1 = adj.z.start, adj.z.stop
        ratio = np.zeros(g.Nx + 1)
        xi = g.x[1:-1]
        ratio[1:-1] = eval_k(k1, xi) / eval_k(k2, xi)
        return -np.asarray(rates.mu21[n0:n1 + 1]) * Y * ratio - rates.beta1[None] * Z[:, :1, :]
    raise ValueError("component must be 'y' or 'z'")


def _interior_levels(traj: Trajectory, config: CarlemanConfig):
    w = config.window
    t = traj.times
    if w.t_lo < t[0] - 1e-9 or w.t_hi > t[-1] + 1e-9:
        raise ValueError("Carleman window not covered by the trajectory")
    return np.nonzero((t > w.t_lo + 1e-9) & (t < w.t_hi - 1e-9))[0]


def carleman_sides(traj: Trajectory, f, k: DegeneracyModel, config: CarlemanConfig,
                   omega=(0.3, 0.7)) -> CarlemanSides:
    """Weighted left side and the two right-hand terms of the Carleman estimate.

    lhs sums  s Theta v_x^2 + s^3 Theta^3 (x/k)^2 v^2  times exp(2 s phi) over
    x-cells (midpoint values) and the interior time/age layers of the window
    (its first and last layers carry infinite Theta and are skipped).
    """
    if k.side is not None and k.side != config.side:
        raise ValueError("coefficient degenerates on the other side of the window configuration")
    grid = traj.grid
    levels = _interior_levels(traj, config)
    w = config.window
    a = grid.a
    rows = np.nonzero((a > w.a_lo + 1e-9) & (np.arange(a.size) < grid.Na))[0]
    xm = grid.x_mid
    h = grid.h
    lever = xm if config.side == "at0" else xm - 1.0
    km = eval_k(k, xm)
    s = config.s
    lhs = 0.0
    V = traj.values
    for n in levels:
        t = traj.times[n]
        v = V[n][rows]
        vx = np.diff(v, axis=1) / h
        vm = 0.5 * (v[:, 1:] + v[:, :-1])
        aa = a[rows][:, None]
        w1 = weight_product(t, aa, xm[None, :], config, 1)
        w3 = weight_product(t, aa, xm[None, :], config, 3)
        dens = s * w1 * vx ** 2 + s ** 3 * w3 * (lever / km) ** 2 * vm ** 2
        lhs += float(np.sum(dens * h)) * grid.dt * grid.da
    win = (w.t_lo, w.t_hi)
    times = traj.times
    reg_a = Region(a=(w.a_lo, grid.A))
    rhs_f = cylinder_integral(np.asarray(f), grid, k, window=win, region=reg_a, times=times)
    reg_w = Region(a=(w.a_lo, grid.A), x=tuple(omega))
    rhs_w = cylinder_integral(V, grid, k, window=win, region=reg_w, times=times)
    return CarlemanSides(lhs, rhs_f, rhs_w)


@dataclass
class SweepTable:
    s: list
    max_ratio: list
    ratios: np.ndarray          # (members, len(s))
    s0_proxy: float | None = None

    def to_dict(self):
        return {"s": list(self.s), "max_ratio": list(self.max_ratio), "s0_proxy": self.s0_proxy}


def carleman_constant_sweep(members, s_list, config: CarlemanConfig, k: DegeneracyModel,
                            omega=(0.3, 0.7), min_members: int = 10) -> SweepTable:
    """Empirical C(s) = max ratio over an ensemble of (trajectory, f) pairs.

    The s0 proxy is the first sweep point after which C(s) changes by at most
    10% at the next point.
    """
    members = list(members)
    if len(members) < min_members:
        raise ValueError(f"need at least {min_members} ensemble members")
    ratios = np.zeros((len(members), len(s_list)))
    for i, (traj, f) in enumerate(members):
        for j, s in enumerate(s_list):
            ratios[i, j] = carleman_sides(traj, f, k, config.with_s(s), omega).ratio
    cmax = ratios.max(axis=0)
    s0 = None
    for j in range(len(s_list) - 1):
        c0, c1 = cmax[j], cmax[j + 1]
        if abs(c1 - c0) <= 0.1 * max(abs(c0), 1e-300) or (c0 == 0 and c1 == 0):
            s0 = float(s_list[j])
            break
    return SweepTable(list(s_list), [float(c) for c in cmax], ratios, s0)


# --------------------------------------------------------------------------- observability
@dataclass
class ObservabilitySides:
    variant: str
    lhs: float
    terms: dict = field(default_factory=dict)

    @property
    def rhs(self):
        return float(sum(self.terms.values()))

    @property
    def ratio(self):
        if self.rhs == 0:
            return 0.0 if self.lhs == 0 else float("inf")
        return self.lhs / self.rhs


def observability_sides(adj: AdjointTrajectory, terminal: TerminalData, delta: float, variant: str,
                        rates: RatePack, k1: DegeneracyModel, k2: DegeneracyModel,
                        omega=(0.3, 0.7)) -> ObservabilitySides:
    """Left side and separate right-hand terms of one observability inequality.

    The trajectory must cover (0, T).  Terms: ``omega_*`` are cylinder
    integrals over (0,T) x (0,A) x omega, ``low_age_*`` over (0,T) x (0,delta)
    x (0,1), ``terminal_*`` are slice integrals of the terminal data over a
    low-age band.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    g = rates.grid
    gamma = max(rates.abar1, rates.abar2)
    if variant.startswith("delta") and not delta > gamma:
        raise ValueError(f"delta must exceed max(abar1, abar2) = {gamma}")
    if not 0 < delta < g.A:
        raise ValueError("delta must lie in (0, A)")
    if adj.y.start != 0 or adj.y.stop != g.Nt:
        raise ValueError("observability needs the adjoint trajectory on the whole of (0, T)")
    times = adj.y.times
    cyl_w = Region(x=tuple(omega))
    low = Region(a=(0.0, delta))

    def cyl(traj, k, region):
        return cylinder_integral(traj.values, g, k, region=region, times=times)

    def term(slice_, k, a_hi):
        return weighted_l2(slice_, g, k, Region(a=(0.0, a_hi)))

    terms = {}
    if variant.endswith("-y"):
        lhs = weighted_l2(adj.y.at_time(g.T - rates.abar2), g, k2)
        terms["omega_y"] = cyl(adj.y, k2, cyl_w)
        if variant == "lowage-y":
            terms["low_age_y"] = cyl(adj.y, k2, low)
            terms["terminal_y"] = term(terminal.y, k2, rates.abar2)
        else:
            terms["terminal_y"] = term(terminal.y, k2, delta)
    else:
        lhs = weighted_l2(adj.z.at_time(g.T - rates.abar1), g, k1)
        terms["omega_z"] = cyl(adj.z, k1, cyl_w)
        terms["omega_y"] = cyl(adj.y, k2, cyl_w)
        if variant == "lowage-z":
            terms["low_age_z"] = cyl(adj.z, k1, low)
            terms["low_age_y"] = cyl(adj.y, k2, low)
            terms["terminal_z"] = term(terminal.z, k1, rates.abar1)
            terms["terminal_y"] = term(terminal.y, k2, rates.abar2)
        else:
            terms["terminal_z"] = term(terminal.z, k1, delta)
            terms["terminal_y"] = term(terminal.y, k2, delta)
    return ObservabilitySides(variant, float(lhs), {k: float(v) for k, v in terms.items()})
