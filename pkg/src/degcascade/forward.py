"""Forward cascade: rates, the mortality transform, the marching solver and energy bounds."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coefficients import DegeneracyModel
from .mesh import TensorGrid, energy
from .scheme import CascadeScheme, Trajectory, trapezoid_age_weights

RATE_NAMES = ("mu11", "mu22", "mu21", "beta1", "beta2")


# --------------------------------------------------------------------------- rates
def _as_trajectory_field(grid, value):
    shape = (grid.Nt + 1, grid.Na + 1, grid.Nx + 1)
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0 or arr.shape == (grid.Na + 1, grid.Nx + 1):
        return np.broadcast_to(arr, shape)
    if arr.shape != shape:
        raise ValueError(f"rate array has shape {arr.shape}, expected {shape} or an (a, x) slice")
    return arr


def fertility_bump(grid: TensorGrid, amplitude: float, abar: float, x_profile=None):
    """amplitude * sin^2(pi (a - abar)/(A - abar)) for a > abar, zero otherwise."""
    a = grid.a
    s = np.clip((a - abar) / (grid.A - abar), 0.0, 1.0)
    prof_a = np.where(a > abar, np.sin(np.pi * s) ** 2, 0.0)
    prof_x = np.ones_like(grid.x) if x_profile is None else np.asarray(x_profile(grid.x), dtype=float)
    return amplitude * np.outer(prof_a, prof_x)


def box_bump(grid: TensorGrid, amplitude, a_range=(0.0, np.inf), x_range=(0.0, 1.0)):
    """amplitude * sin^2 bump supported in a box of (a, x), constant in t."""
    def prof(s, lo, hi):
        hi = min(hi, s[-1])
        r = np.clip((s - lo) / (hi - lo), 0.0, 1.0)
        return np.sin(np.pi * r) ** 2
    return amplitude * np.outer(prof(grid.a, *a_range), prof(grid.x, *x_range))


def rate_from_csv(path, grid: TensorGrid):
    """Rate table with columns (a, x, value) or (t, a, x, value), nearest-node placement."""
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty rate table")
    timed = "t" in rows[0]
    out = np.zeros((grid.Nt + 1, grid.Na + 1, grid.Nx + 1) if timed else (grid.Na + 1, grid.Nx + 1))
    t, a, x = grid.t, grid.a, grid.x
    for r in rows:
        j = int(np.argmin(np.abs(a - float(r["a"]))))
        i = int(np.argmin(np.abs(x - float(r["x"]))))
        if timed:
            n = int(np.argmin(np.abs(t - float(r["t"]))))
            out[n, j, i] = float(r["value"])
        else:
            out[j, i] = float(r["value"])
    return out


@dataclass
class RatePack:
    """Grid-sampled mortality, interaction and fertility rates.

    mu11, mu22, mu21 are stored on (t, a, x) nodes (possibly as read-only
    broadcasts of a single slice); beta1, beta2 on (a, x) nodes.
    """
    grid: TensorGrid
    mu11: np.ndarray
    mu22: np.ndarray
    mu21: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    abar1: float
    abar2: float
    _static: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        g = self.grid
        for name in ("mu11", "mu22", "mu21"):
            setattr(self, name, _as_trajectory_field(g, getattr(self, name)))
        for name in ("beta1", "beta2"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim == 0:
                arr = np.full((g.Na + 1, g.Nx + 1), float(arr))
            if arr.shape != (g.Na + 1, g.Nx + 1):
                raise ValueError(f"{name} must be an (a, x) field")
            setattr(self, name, arr)
        self.validate()

    def validate(self):
        g = self.grid
        gamma = min(g.T, g.A)
        for ab in (self.abar1, self.abar2):
            if not 0.0 < ab < gamma:
                raise ValueError(f"fertility onset {ab} must lie in (0, min(T, A)) = (0, {gamma})")
        for name in RATE_NAMES:
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            if np.any(arr < 0):
                raise ValueError(f"{name} must be nonnegative")
        for name, ab in (("beta1", self.abar1), ("beta2", self.abar2)):
            young = g.a <= ab + 1e-12
            if np.any(getattr(self, name)[young] != 0):
                raise ValueError(f"{name} must vanish for a <= {ab}")

    def time_independent(self, name):
        if name not in self._static:
            arr = getattr(self, name)
            self._static[name] = bool(arr.strides[0] == 0 or np.all(arr == arr[0]))
        return self._static[name]

    def replace(self, **changes):
        kw = {n: getattr(self, n) for n in ("grid",) + RATE_NAMES + ("abar1", "abar2")}
        kw.update(changes)
        return RatePack(**kw)

    @classmethod
    def constant(cls, grid, mu11=0.1, mu22=0.1, mu21=1.0, b1=4.0, b2=3.0, abar1=0.5, abar2=0.5,
                 x_profile=None):
        """Constant mortalities/interaction and sin^2 fertility bumps past the onset ages."""
        return cls(grid, mu11, mu22, mu21,
                   fertility_bump(grid, b1, abar1, x_profile),
                   fertility_bump(grid, b2, abar2, x_profile), abar1, abar2)


# --------------------------------------------------------------------------- transform
@dataclass(frozen=True)
class Mortality:
    """Age-dependent death rate with a survival primitive int_0^a mu.

    kinds: ``zero``, ``constant`` (c), ``inverse_gap`` (c/(A-a), primitive
    c log(A/(A-a))), ``tabulated`` (samples on the age grid, cumulative trapezoid).
    """
    kind: str = "zero"
    c: float = 0.0
    samples: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "inverse_gap", "tabulated"):
            raise ValueError(f"unknown mortality kind {self.kind!r}")
        if self.c < 0:
            raise ValueError("mortality must be nonnegative")
        if self.kind == "tabulated":
            if self.samples is None or np.any(np.asarray(self.samples[1]) < 0):
                raise ValueError("tabulated mortality needs nonnegative samples")

    def primitive(self, a, A):
        a = np.asarray(a, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(a)
        if self.kind == "constant":
            return self.c * a
        if self.kind == "inverse_gap":
            return self.c * np.log(A / (A - a))
        sa, sm = (np.asarray(s, dtype=float) for s in self.samples)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(sa) * (sm[1:] + sm[:-1]))])
        return np.interp(a, sa, cum)


def transform_model(grid: TensorGrid, y0, w0, gbar, mu13: Mortality, mu23: Mortality,
                    gamma1, gamma2, mu, eta=None):
    """Absorb the unbounded age mortalities mu13, mu23 into the unknowns.

    Returns (u0, v0, g, beta1, beta2, mu21).  Every argument field carries age
    on its second-to-last axis.  Ages beyond A - eta use the survival factor
    at A - eta.
    """
    eta = 2 * grid.da if eta is None else eta
    if eta <= 0:
        raise ValueError("eta must be positive")
    for name, arr in (("gamma1", gamma1), ("gamma2", gamma2), ("mu", mu)):
        if np.any(np.asarray(arr) < 0):
            raise ValueError(f"{name} must be nonnegative")
    a = np.minimum(grid.a, grid.A - eta)
    m1 = mu13.primitive(a, grid.A)[:, None]
    m3 = mu23.primitive(a, grid.A)[:, None]
    up1, up3 = np.exp(m1), np.exp(m3)
    return (up1 * np.asarray(y0), up3 * np.asarray(w0), up1 * np.asarray(gbar),
            np.exp(-m1) * np.asarray(gamma1), np.exp(-m3) * np.asarray(gamma2),
            np.exp(m3 - m1) * np.asarray(mu))


# --------------------------------------------------------------------------- states
@dataclass
class CascadeState:
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.u.shape != self.v.shape or self.u.ndim != 2:
            raise ValueError("u and v must be (a, x) slices of the same shape")
        for name in ("u", "v"):
            s = getattr(self, name)
            if np.any(s[:, 0] != 0) or np.any(s[:, -1] != 0):
                raise ValueError(f"{name} must vanish at x = 0 and x = 1")

    @classmethod
    def zeros(cls, grid, t=0.0):
        z = np.zeros((grid.Na + 1, grid.Nx + 1))
        return cls(z, z.copy(), t)


@dataclass
class CascadeTrajectory:
    u: Trajectory
    v: Trajectory

    def final(self):
        return CascadeState(self.u.values[-1], self.v.values[-1], float(self.u.times[-1]))

    def at_time(self, t):
        return CascadeState(self.u.at_time(t), self.v.at_time(t), t)


def _window_levels(grid, window, t_start):
    t0, t1 = (t_start, grid.T) if window is None else window
    if t0 < -1e-12 or t1 > grid.T + 1e-12 or t1 < t0:
        raise ValueError("window outside [0, T]")
    return grid.time_index(t0), grid.time_index(t1)


def check_space_support(g, grid, omega):
    """Raise unless g vanishes at every x node outside the closed interval omega."""
    if g is None or omega is None:
        return
    outside = (grid.x < omega[0] - 1e-12) | (grid.x > omega[1] + 1e-12)
    if np.any(np.asarray(g)[..., outside] != 0):
        raise ValueError("control must vanish outside omega")


def solve_forward(initial: CascadeState, rates: RatePack, k1: DegeneracyModel, k2: DegeneracyModel,
                  control=None, window=None, omega=None, v_source=None, inflow_u=None,
                  scheme: CascadeScheme | None = None) -> CascadeTrajectory:
    """March the cascade from ``initial`` over a time window of the grid.

    ``control`` (u source), ``v_source`` and the inflow profiles added to the
    renewal trace are indexed by level relative to the window start.
    """
    grid = rates.grid
    n0, n1 = _window_levels(grid, window, initial.t)
    if abs(initial.t - n0 * grid.dt) > 1e-9:
        raise ValueError("initial state time does not match the window start")
    L = n1 - n0
    for name, arr in (("control", control), ("v_source", v_source)):
        if arr is not None and np.shape(arr) != (L + 1, grid.Na + 1, grid.Nx + 1):
            raise ValueError(f"{name} must have shape {(L + 1, grid.Na + 1, grid.Nx + 1)}")
    check_space_support(control, grid, omega)
    sch = scheme or CascadeScheme(grid, k1, k2, rates)
    u, v = sch.forward(initial.u, initial.v, n0, n1, g=control, fv=v_source, inflow_u=inflow_u)
    return CascadeTrajectory(Trajectory(grid, n0, u), Trajectory(grid, n0, v))


def renewal_trace(slice_, beta, grid: TensorGrid):
    """Trapezoid in age of beta * slice at every x node."""
    c = trapezoid_age_weights(grid)
    return c @ (np.asarray(beta) * np.asarray(slice_))


# --------------------------------------------------------------------------- Gronwall
@dataclass
class GronwallReport:
    times: np.ndarray
    F1: np.ndarray
    bound1: np.ndarray
    F2: np.ndarray
    bound2: np.ndarray
    C1: float
    C2: float
    tol: float

    @property
    def passed1(self):
        return bool(np.all(self.F1 <= self.bound1 * (1 + self.tol) + 1e-300))

    @property
    def passed2(self):
        return bool(np.all(self.F2 <= self.bound2 * (1 + self.tol) + 1e-300))

    @property
    def passed(self):
        return self.passed1 and self.passed2

    def worst(self):
        """Largest F / bound over the slices (0 when both sides vanish)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = np.where(self.bound1 > 0, self.F1 / self.bound1, 0.0)
            r2 = np.where(self.bound2 > 0, self.F2 / self.bound2, 0.0)
        return float(np.max(r1)), float(np.max(r2))

    def to_dict(self):
        w1, w2 = self.worst()
        return {"C1": self.C1, "C2": self.C2, "tol": self.tol, "passed_u": self.passed1,
                "passed_v": self.passed2, "worst_ratio_u": w1, "worst_ratio_v": w2}


def gronwall_check(traj: CascadeTrajectory, rates: RatePack, k1: DegeneracyModel,
                   k2: DegeneracyModel, tol: float = 0.05) -> GronwallReport:
    """Compare slice energies with the a-priori exponential bounds.

    F1 = |U|^2 in the 1/k1 energy, bounded by e^{C1 t} F1(0) with
    C1 = |beta1|_inf^2 A.  For V, with m = |mu21|_inf, K = C2 + m and
    G(t) = |U(t)|^2 in the 1/k2 energy:
        F2(t) <= e^{K t} F2(0) + m int_0^t e^{K (t-s)} G(s) ds.
    Norms are the discrete energy pairing of the solver.
    """
    grid = rates.grid
    times = traj.u.times - traj.u.times[0]
    U, V = traj.u.values, traj.v.values
    F1 = np.array([energy(s, grid, k1) for s in U])
    F2 = np.array([energy(s, grid, k2) for s in V])
    G = np.array([energy(s, grid, k2) for s in U])
    C1 = float(np.max(rates.beta1)) ** 2 * grid.A
    C2 = float(np.max(rates.beta2)) ** 2 * grid.A
    n0, n1 = traj.u.start, traj.u.stop
    m = float(np.max(rates.mu21[n0:n1 + 1]))
    K = C2 + m
    b1 = np.exp(C1 * times) * F1[0]
    b2 = np.empty_like(F2)
    for n, t in enumerate(times):
        integrand = np.exp(K * (t - times[:n + 1])) * G[:n + 1]
        b2[n] = np.exp(K * t) * F2[0] + m * np.trapezoid(integrand, times[:n + 1])
    return GronwallReport(times, F1, b1, F2, b2, C1, C2, tol)
