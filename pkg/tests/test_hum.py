import numpy as np
import pytest

from degcascade.coefficients import DegeneracyModel
from degcascade.hum import (ControlSetup, HumProblem, conjugate_residual, functional_J, minimize_F,
                            minimize_J, minimize_joint, null_control_full, synthesize_control)
from degcascade.presets import canonical


@pytest.fixture(scope="module")
def prob():
    p = canonical(12, 16)
    return p, HumProblem(p.rates, p.k1, p.k2, p.setup)


def rand_band(rng, hp, n=None):
    shape = hp.band.shape if n is None else (n,) + hp.band.shape
    return rng.standard_normal(shape) * hp.band


def test_setup_validation(prob):
    p, hp = prob
    for bad in (dict(omega=(0.0, 0.5)), dict(omega=(0.6, 0.4)), dict(eps=0.0), dict(method="cg"),
                dict(maxiter=0)):
        with pytest.raises(ValueError):
            ControlSetup(**bad)
    with pytest.raises(ValueError):
        ControlSetup(delta=0.4).validate(p.rates)
    with pytest.raises(ValueError):
        ControlSetup().validate(p.rates.replace(abar2=0.4))
    ControlSetup(experimental=True).validate(p.rates.replace(abar2=0.4))


def test_J_trivial_cases(prob):
    p, hp = prob
    rng = np.random.default_rng(0)
    zero = np.zeros_like(hp.band)
    assert functional_J(zero, p.v0, hp) == 0.0
    for _ in range(5):
        assert functional_J(rand_band(rng, hp), zero, hp) > 0
    with pytest.raises(ValueError):
        functional_J(np.ones_like(hp.band), p.v0, hp)


def test_parallelogram(prob):
    p, hp = prob
    rng = np.random.default_rng(1)
    zero = np.zeros_like(hp.band)
    g1, g2 = rand_band(rng, hp), rand_band(rng, hp)
    lhs = hp.J(g1 + g2, zero) + hp.J(g1 - g2, zero)
    rhs = 2 * hp.J(g1, zero) + 2 * hp.J(g2, zero)
    assert lhs == pytest.approx(rhs, rel=1e-10)


@pytest.mark.parametrize("which", ["J", "F", "K"])
def test_directional_derivatives(prob, which):
    p, hp = prob
    rng = np.random.default_rng(2)
    yhat = hp.y_of(rand_band(rng, hp))
    h = 1e-5
    if which == "J":
        fun, grad, inner = (lambda g: hp.J(g, p.v0)), (lambda g: hp.grad_J(g, p.v0)), (lambda a, b: hp.ip(a, b, 2))
        g, d = rand_band(rng, hp), rand_band(rng, hp)
    elif which == "F":
        fun, grad = (lambda g: hp.F(g, p.u0, yhat)), (lambda g: hp.grad_F(g, p.u0, yhat))
        inner = lambda a, b: hp.ip(a, b, 1)
        g, d = rand_band(rng, hp), rand_band(rng, hp)
    else:
        fun, grad, inner = (lambda g: hp.K(g, p.u0, p.v0)), (lambda g: hp.grad_K(g, p.u0, p.v0)), hp.ip_pair
        g, d = rand_band(rng, hp, 2), rand_band(rng, hp, 2)
    fd = (fun(g + h * d) - fun(g - h * d)) / (2 * h)
    an = inner(grad(g), d)
    assert abs(fd - an) <= 1e-6 * abs(an)


def test_conjugate_residual_monotone_and_exact():
    rng = np.random.default_rng(3)
    M = rng.standard_normal((30, 30))
    A = M @ M.T + 0.1 * np.eye(30)
    b = rng.standard_normal(30)
    x, rep = conjugate_residual(lambda v: A @ v, b, np.dot, tol=1e-12, maxiter=500)
    assert rep.converged and np.allclose(A @ x, b, atol=1e-9)
    assert all(r1 <= r0 for r0, r1 in zip(rep.residuals, rep.residuals[1:]))
    x0, rep0 = conjugate_residual(lambda v: A @ v, 0 * b, np.dot)
    assert rep0.iterations == 0 and not np.any(x0)
    _, short = conjugate_residual(lambda v: A @ v, b, np.dot, tol=1e-14, maxiter=2)
    assert not short.converged and short.iterations == 2


def test_minimizers_trivial(prob):
    p, hp = prob
    zero = np.zeros_like(p.v0)
    g2, y, rep = minimize_J(zero, hp)
    assert not np.any(g2) and rep.iterations <= 1
    g1, z, rep = minimize_F(zero, np.zeros_like(y), hp)
    assert not np.any(g1) and rep.iterations <= 1


def test_two_stage_identities_and_residual(prob):
    p, hp = prob
    g2, y, rj = minimize_J(p.v0, hp)
    zero = np.zeros_like(hp.band)
    gr0 = hp.grad_J(zero, p.v0)
    gr = hp.grad_J(g2, p.v0)
    assert np.sqrt(hp.ip(gr, gr, 2)) <= 1.01 * hp.setup.tol * np.sqrt(hp.ip(gr0, gr0, 2))
    assert rj.converged and rj.identity_rel <= 1e-8
    g1, z, rf = minimize_F(p.u0, y, hp)
    assert rf.converged and rf.identity_rel <= 1e-8
    assert all(b <= a for a, b in zip(rj.residuals, rj.residuals[1:]))


def test_joint_identity(prob):
    p, hp = prob
    g, z, y, rep = minimize_joint(p.u0, p.v0, hp)
    assert rep.converged and rep.identity_rel <= 1e-8


def test_synthesis_zero_data(prob):
    p, hp = prob
    zero = np.zeros_like(p.u0)
    res = synthesize_control(zero, zero, hp)
    assert not np.any(res.control)
    end = res.trajectory.final()
    assert not np.any(end.u) and not np.any(end.v)
    assert res.report.C_hat == 0.0


def test_control_support_and_drop(prob):
    p, hp = prob
    res = synthesize_control(p.u0, p.v0, hp)
    g = p.grid
    outside = (g.x < p.setup.omega[0] - 1e-12) | (g.x > p.setup.omega[1] + 1e-12)
    assert not np.any(res.control[..., outside])
    assert not np.any(res.control[0])
    assert res.trajectory.u.start == hp.n0
    assert res.report.residual_drop > 10
    assert res.report.terminal_full <= res.report.terminal_full_free


def test_pipeline_linear(prob):
    p, hp = prob
    a = synthesize_control(p.u0, p.v0, hp)
    b = synthesize_control(2.5 * p.u0, 2.5 * p.v0, hp)
    scale = np.max(np.abs(a.control))
    assert np.max(np.abs(b.control - 2.5 * a.control)) <= 1e-6 * scale
    assert b.report.terminal_band == pytest.approx(2.5 * a.report.terminal_band, rel=1e-3)


def test_eps_monotone():
    vals = []
    for eps in (1e-4, 5e-5, 2.5e-5):
        p = canonical(12, 16, eps=eps)
        vals.append(synthesize_control(p.u0, p.v0, HumProblem(p.rates, p.k1, p.k2, p.setup)).report.terminal_band)
    assert vals[1] <= vals[0] * (1 + 1e-6) and vals[2] <= vals[1] * (1 + 1e-6)


def test_two_stage_method_runs(prob):
    p, _ = prob
    setup = ControlSetup(method="two_stage")
    res = synthesize_control(p.u0, p.v0, HumProblem(p.rates, p.k1, p.k2, setup))
    assert set(res.report.stages) == {"J", "F"}
    # the u band residual drops; the cascade term leaves v to itself
    assert res.report.terminal_band < res.report.terminal_band_free


def test_full_requires_equal_coefficients(prob):
    p, _ = prob
    with pytest.raises(ValueError):
        null_control_full(p.u0, p.v0, p.rates, p.k1, p.k2, ControlSetup())
    with pytest.raises(ValueError):
        null_control_full(p.u0, p.v0, p.rates, p.k1, p.k2, ControlSetup(equal_coefficients=True))


def test_full_problem(prob):
    p, _ = prob
    k = DegeneracyModel.power_at_0(0.5)
    setup = ControlSetup(equal_coefficients=True)
    zero = np.zeros_like(p.u0)
    res0 = null_control_full(zero, zero, p.rates, k, k, setup)
    assert not np.any(res0.control)
    res = null_control_full(p.u0, p.v0, p.rates, k, k, setup)
    g = p.grid
    n0 = g.time_index(g.T - p.rates.abar1)
    assert not np.any(res.control[:n0 + 1])
    assert res.trajectory.u.levels == g.Nt + 1
    assert res.report.gronwall["passed_u"] and res.report.gronwall["passed_v"]
    assert np.isfinite(res.report.C_hat) and res.report.C_hat > 0
    assert res.report.residual_drop > 10
