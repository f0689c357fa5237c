"""Penalized HUM synthesis of a null control on the age band (delta, A).

Terminal data g live on the band rows delta < a_j < A and interior x, with
the solver's energy pairing as inner product.  Every gradient is a forward
solve of the transpose-verified scheme, so the discrete optimality identities
hold up to the solver tolerance.

Two constructions are available:

``two_stage``
    minimize J over y-data g2, then F over z-data g1 with the coupling load
    from the minimizing y, and steer with g = z * chi_omega.
``joint``
    minimize a single functional over (g1, g2) for the coupled adjoint; its
    gradient is the band trace of the controlled state (u, v)(T), so both
    components are driven to O(eps |g|) at the optimum.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coefficients import DegeneracyModel, same_coefficient
from .forward import CascadeState, CascadeTrajectory, RatePack, gronwall_check, solve_forward
from .mesh import cylinder_integral, pairing, weighted_l2
from .scheme import CascadeScheme, Trajectory

METHODS = ("two_stage", "joint")


@dataclass
class ControlSetup:
    omega: tuple = (0.3, 0.7)
    delta: float = 0.6
    eps: float = 1e-8
    tol: float = 1e-10
    maxiter: int = 2000
    method: str = "joint"
    equal_coefficients: bool = False
    experimental: bool = False

    def __post_init__(self):
        a, b = self.omega
        if not 0.0 < a < b < 1.0:
            raise ValueError("omega must satisfy 0 < alpha < beta < 1")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.tol <= 0 or self.maxiter < 1:
            raise ValueError("need tol > 0 and maxiter >= 1")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")

    def validate(self, rates: RatePack):
        g = rates.grid
        if not max(rates.abar1, rates.abar2) < self.delta < g.A:
            raise ValueError("delta must lie in (max(abar1, abar2), A)")
        if rates.abar1 != rates.abar2 and not self.experimental:
            raise ValueError("the construction needs abar1 == abar2 (set experimental to override)")


@dataclass
class SolveReport:
    iterations: int
    residuals: list
    converged: bool
    rayleigh_min: float
    true_residual: float
    identity_lhs: float = float("nan")
    identity_rhs: float = float("nan")

    @property
    def identity_rel(self):
        s = max(abs(self.identity_lhs), abs(self.identity_rhs))
        return 0.0 if s == 0 else abs(self.identity_lhs - self.identity_rhs) / s

    def to_dict(self):
        return {"iterations": self.iterations, "converged": self.converged,
                "rayleigh_min": self.rayleigh_min, "true_residual": self.true_residual,
                "residual_history": [float(r) for r in self.residuals],
                "identity_lhs": self.identity_lhs, "identity_rhs": self.identity_rhs,
                "identity_rel": self.identity_rel}


@dataclass
class HumReport:
    method: str
    stages: dict
    control_norm: float
    terminal_band: float
    terminal_band_free: float
    terminal_full: float
    terminal_full_free: float
    initial_norm: float
    unguaranteed: bool = False
    gronwall: dict | None = None

    @property
    def residual_drop(self):
        return float("inf") if self.terminal_band == 0 else self.terminal_band_free / self.terminal_band

    @property
    def C_hat(self):
        return 0.0 if self.initial_norm == 0 else self.control_norm / self.initial_norm

    def to_dict(self):
        return {"method": self.method, "stages": {k: v.to_dict() for k, v in self.stages.items()},
                "control_norm": self.control_norm, "terminal_band": self.terminal_band,
                "terminal_band_free": self.terminal_band_free, "terminal_full": self.terminal_full,
                "terminal_full_free": self.terminal_full_free, "initial_norm": self.initial_norm,
                "residual_drop": self.residual_drop, "C_hat": self.C_hat,
                "unguaranteed": self.unguaranteed, "gronwall": self.gronwall}


# --------------------------------------------------------------------------- Krylov
def conjugate_residual(apply, b, inner, tol=1e-10, maxiter=2000, restarts=3):
    """Solve apply(x) = b for a self-adjoint positive operator.

    Conjugate-residual iteration (the CG variant minimizing the residual
    norm over the Krylov space, so the residual history is nonincreasing).
    After the recursive residual meets ``tol`` relative to |b| the true
    residual is recomputed and the iteration restarted if needed.
    """
    norm = lambda v: float(np.sqrt(max(inner(v, v), 0.0)))
    b_norm = norm(b)
    x = np.zeros_like(b)
    hist = [b_norm]
    if b_norm == 0.0:
        return x, SolveReport(0, hist, True, float("nan"), 0.0)
    its, ray = 0, np.inf
    r = b.copy()
    for _ in range(restarts + 1):
        Ar = apply(r)
        p, Ap = r.copy(), Ar.copy()
        rAr = inner(r, Ar)
        while its < maxiter and hist[-1] > tol * b_norm:
            ray = min(ray, rAr / inner(r, r))
            alpha = rAr / inner(Ap, Ap)
            x += alpha * p
            r -= alpha * Ap
            its += 1
            hist.append(min(norm(r), hist[-1]))
            Ar = apply(r)
            rAr_new = inner(r, Ar)
            beta = rAr_new / rAr
            rAr = rAr_new
            p = r + beta * p
            Ap = Ar + beta * Ap
        r = b - apply(x)
        true = norm(r)
        if true <= tol * b_norm or its >= maxiter:
            break
        hist.append(min(true, hist[-1]))
    true = norm(b - apply(x))
    return x, SolveReport(its, hist, true <= tol * b_norm, float(ray), true / b_norm)


# --------------------------------------------------------------------------- problem
class HumProblem:
    """Band spaces, observation masks and the functionals on one control window."""

    def __init__(self, rates: RatePack, k1: DegeneracyModel, k2: DegeneracyModel,
                 setup: ControlSetup, scheme: CascadeScheme | None = None):
        setup.validate(rates)
        self.rates, self.k1, self.k2, self.setup = rates, k1, k2, setup
        g = self.grid = rates.grid
        self.scheme = scheme or CascadeScheme(g, k1, k2, rates)
        self.n1 = g.Nt
        self.n0 = g.time_index(g.T - rates.abar1)
        self.L = self.n1 - self.n0
        rows = (g.a > setup.delta + 1e-12) & (np.arange(g.Na + 1) < g.Na)
        self.band = np.zeros((g.Na + 1, g.Nx + 1))
        self.band[np.ix_(rows, np.arange(1, g.Nx))] = 1.0
        x = g.x
        self.chi = ((x >= setup.omega[0] - 1e-12) & (x <= setup.omega[1] + 1e-12)).astype(float)
        self.w = {1: self.scheme.w[1], 2: self.scheme.w[2]}

    # inner products ---------------------------------------------------------
    def ip(self, f, g, e):
        return pairing(f, g, self.grid, None, self.w[e])

    def ip_pair(self, f, g):
        return self.ip(f[0], g[0], 1) + self.ip(f[1], g[1], 2)

    def cyl(self, f, g, e):
        """Discrete cylinder pairing sum_{m>=1} dt <f^m, g^m>."""
        return self.grid.dt * sum(self.ip(f[m], g[m], e) for m in range(1, self.L + 1))

    def observe(self, traj):
        out = traj * self.chi
        out[0] = 0.0
        return out

    def check_terminal(self, g):
        g = np.asarray(g, dtype=float)
        if g.shape != self.band.shape:
            raise ValueError("terminal data has the wrong shape")
        if np.any(g * (1.0 - self.band) != 0):
            raise ValueError("terminal data must be supported in the band delta < a < A")
        return g

    # stage J (y only) -------------------------------------------------------
    def y_of(self, g2):
        return self.scheme.march_adjoint(2, g2, self.n0, self.n1)

    def J(self, g2, v0):
        g2 = self.check_terminal(g2)
        y = self.y_of(g2)
        oy = self.observe(y)
        return 0.5 * self.cyl(oy, oy, 2) + self.ip(y[0], v0, 2) + 0.5 * self.setup.eps * self.ip(g2, g2, 2)

    def grad_J(self, g2, v0):
        oy = self.observe(self.y_of(g2))
        v = self.scheme.march(2, v0, self.n0, self.n1, source=oy)
        return v[-1] * self.band + self.setup.eps * g2

    # stage F (z with fixed coupling load) -----------------------------------
    def coupling_load(self, yhat):
        return self.scheme.mu21_slices(self.n0, self.n1) * yhat * self.scheme._ratio_field()

    def z_of(self, g1, load=None):
        return self.scheme.march_adjoint(1, g1, self.n0, self.n1, load)

    def F(self, g1, u0, yhat):
        g1 = self.check_terminal(g1)
        z = self.z_of(g1, self.coupling_load(yhat))
        oz = self.observe(z)
        return 0.5 * self.cyl(oz, oz, 1) + self.ip(z[0], u0, 1) + 0.5 * self.setup.eps * self.ip(g1, g1, 1)

    def grad_F(self, g1, u0, yhat):
        oz = self.observe(self.z_of(g1, self.coupling_load(yhat)))
        u = self.scheme.march(1, u0, self.n0, self.n1, source=oz)
        return u[-1] * self.band + self.setup.eps * g1

    # joint functional --------------------------------------------------------
    def adjoint_pair(self, g):
        return self.scheme.adjoint(g[0], g[1], self.n0, self.n1)

    def K(self, g, u0, v0):
        z, y = self.adjoint_pair(g)
        oz = self.observe(z)
        return (0.5 * self.cyl(oz, oz, 1) + self.ip(z[0], u0, 1) + self.ip(y[0], v0, 2)
                + 0.5 * self.setup.eps * self.ip_pair(g, g))

    def grad_K(self, g, u0, v0):
        z, _ = self.adjoint_pair(g)
        u, v = self.scheme.forward(u0, v0, self.n0, self.n1, g=self.observe(z))
        return np.stack([u[-1], v[-1]]) * self.band + self.setup.eps * g


# --------------------------------------------------------------------------- stages
def functional_J(g2, v0, problem: HumProblem):
    return problem.J(g2, v0)


def minimize_J(v0, problem: HumProblem):
    """Minimizer of J, its adjoint trajectory and the solve report (identity (y) filled in)."""
    s = problem.setup
    zero = np.zeros_like(problem.band)
    b = -problem.grad_J(zero, v0)
    apply = lambda g: problem.grad_J(g, zero)
    g2, rep = conjugate_residual(apply, b, lambda f, h: problem.ip(f, h, 2), s.tol, s.maxiter)
    y = problem.y_of(g2)
    oy = problem.observe(y)
    rep.identity_lhs = problem.cyl(oy, oy, 2) + s.eps * problem.ip(g2, g2, 2)
    rep.identity_rhs = -problem.ip(y[0], v0, 2)
    return g2, y, rep


def minimize_F(u0, yhat, problem: HumProblem):
    """Minimizer of F for the coupling load of ``yhat``; identity uses the homogeneous part."""
    s = problem.setup
    zero = np.zeros_like(problem.band)
    b = -problem.grad_F(zero, u0, yhat)
    apply = lambda g: problem.grad_F(g, zero, np.zeros_like(yhat))
    g1, rep = conjugate_residual(apply, b, lambda f, h: problem.ip(f, h, 1), s.tol, s.maxiter)
    zhat = problem.z_of(g1, problem.coupling_load(yhat))
    zh = problem.z_of(g1)
    rep.identity_lhs = problem.cyl(problem.observe(zhat), problem.observe(zh), 1) + s.eps * problem.ip(g1, g1, 1)
    rep.identity_rhs = -problem.ip(zh[0], u0, 1)
    return g1, zhat, rep


def minimize_joint(u0, v0, problem: HumProblem):
    s = problem.setup
    zero = np.zeros((2,) + problem.band.shape)
    b = -problem.grad_K(zero, u0, v0)
    zs = np.zeros_like(problem.band)
    apply = lambda g: problem.grad_K(g, zs, zs)
    g, rep = conjugate_residual(apply, b, problem.ip_pair, s.tol, s.maxiter)
    z, y = problem.adjoint_pair(g)
    oz = problem.observe(z)
    rep.identity_lhs = problem.cyl(oz, oz, 1) + s.eps * problem.ip_pair(g, g)
    rep.identity_rhs = -problem.ip(z[0], u0, 1) - problem.ip(y[0], v0, 2)
    return g, z, y, rep


# --------------------------------------------------------------------------- synthesis
@dataclass
class ControlResult:
    control: np.ndarray
    trajectory: CascadeTrajectory
    report: HumReport
    terminal_data: dict = field(default_factory=dict)


def band_norm(state: CascadeState, problem: HumProblem):
    """sqrt(|u|^2_1 + |v|^2_2) in the energy pairing over the controlled band rows."""
    bu, bv = state.u * problem.band, state.v * problem.band
    return float(np.sqrt(problem.ip(bu, bu, 1) + problem.ip(bv, bv, 2)))


def full_norm(state: CascadeState, problem: HumProblem):
    g = problem.grid
    return float(np.sqrt(weighted_l2(state.u, g, problem.k1) + weighted_l2(state.v, g, problem.k2)))


def synthesize_control(u0, v0, problem: HumProblem) -> ControlResult:
    """Control on the window (T - abar1, T) from the state (u0, v0) at its start."""
    setup = problem.setup
    grid = problem.grid
    u0 = np.asarray(u0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    t0 = problem.n0 * grid.dt
    window = (t0, grid.T)
    stages, data = {}, {}
    if setup.method == "joint":
        g, z, y, rep = minimize_joint(u0, v0, problem)
        stages["joint"] = rep
        data = {"g1": g[0], "g2": g[1]}
    else:
        g2, y, rep_j = minimize_J(v0, problem)
        g1, z, rep_f = minimize_F(u0, y, problem)
        stages["J"], stages["F"] = rep_j, rep_f
        data = {"g1": g1, "g2": g2}
    control = problem.observe(z)
    start = CascadeState(u0, v0, t0)
    traj = solve_forward(start, problem.rates, problem.k1, problem.k2, control=control,
                         window=window, omega=setup.omega, scheme=problem.scheme)
    free = solve_forward(start, problem.rates, problem.k1, problem.k2, window=window,
                         scheme=problem.scheme)
    end, end_free = traj.final(), free.final()
    cnorm = float(np.sqrt(cylinder_integral(control, grid, problem.k1, window=window,
                                            times=traj.u.times)))
    init = float(np.sqrt(weighted_l2(u0, grid, problem.k1)) + np.sqrt(weighted_l2(v0, grid, problem.k2)))
    report = HumReport(setup.method, stages, cnorm, band_norm(end, problem), band_norm(end_free, problem),
                       full_norm(end, problem), full_norm(end_free, problem), init,
                       unguaranteed=problem.rates.abar1 != problem.rates.abar2)
    return ControlResult(control, traj, report, data)


def null_control_full(u0, v0, rates: RatePack, k1: DegeneracyModel, k2: DegeneracyModel,
                      setup: ControlSetup) -> ControlResult:
    """Free evolution on (0, T - abar1) followed by the band control on (T - abar1, T).

    The returned control and trajectory cover all of (0, T); the report's
    control norm and constant refer to the full cylinder and the data at t = 0.
    """
    equal = same_coefficient(k1, k2)
    if not (setup.equal_coefficients and equal) and not setup.experimental:
        raise ValueError("the full construction needs k1 == k2 and the equal_coefficients flag "
                         "(or the experimental flag)")
    if setup.equal_coefficients and not equal:
        raise ValueError("equal_coefficients flag set but k1 != k2")
    problem = HumProblem(rates, k1, k2, setup)
    grid = rates.grid
    start = CascadeState(u0, v0, 0.0)
    stage0 = solve_forward(start, rates, k1, k2, window=(0.0, problem.n0 * grid.dt), scheme=problem.scheme)
    gw = gronwall_check(stage0, rates, k1, k2)
    mid = stage0.final()
    res = synthesize_control(mid.u, mid.v, problem)
    n0 = problem.n0
    g_full = np.zeros((grid.Nt + 1, grid.Na + 1, grid.Nx + 1))
    g_full[n0:] = res.control
    u = np.concatenate([stage0.u.values[:-1], res.trajectory.u.values])
    v = np.concatenate([stage0.v.values[:-1], res.trajectory.v.values])
    traj = CascadeTrajectory(Trajectory(grid, 0, u), Trajectory(grid, 0, v))
    rep = res.report
    rep.control_norm = float(np.sqrt(cylinder_integral(g_full, grid, k1)))
    rep.initial_norm = float(np.sqrt(weighted_l2(start.u, grid, k1)) + np.sqrt(weighted_l2(start.v, grid, k2)))
    rep.unguaranteed = rep.unguaranteed or not equal
    rep.gronwall = gw.to_dict()
    # the free baseline of the report must start from t = 0 as well
    free = solve_forward(start, rates, k1, k2, scheme=problem.scheme).final()
    rep.terminal_band_free = band_norm(free, problem)
    rep.terminal_full_free = full_norm(free, problem)
    return ControlResult(g_full, traj, rep, res.terminal_data)
