import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st
from scipy.integrate import quad

from degcascade.coefficients import DegeneracyModel
from degcascade.forward import (CascadeState, Mortality, RatePack, fertility_bump, gronwall_check,
                                renewal_trace, solve_forward, transform_model)
from degcascade.mesh import TensorGrid
from degcascade.presets import bubble_product, gaussian_bump
from degcascade.scheme import CascadeScheme
from degcascade.verification import space_order, time_order

from conftest import random_slice


def test_zero_data_zero_trajectory(small):
    grid, k1, k2, rates = small
    tr = solve_forward(CascadeState.zeros(grid), rates, k1, k2)
    assert not np.any(tr.u.values) and not np.any(tr.v.values)
    assert tr.u.levels == grid.Nt + 1


def test_decoupling_is_bitwise(small):
    grid, k1, k2, rates = small
    r0 = rates.replace(mu21=0.0)
    rng = np.random.default_rng(0)
    st0 = CascadeState(random_slice(rng, grid), random_slice(rng, grid))
    tr = solve_forward(st0, r0, k1, k2)
    alone = CascadeScheme(grid, k1, k2, r0).march(2, st0.v, 0, grid.Nt)
    assert np.array_equal(tr.v.values, alone)
    # and v no longer sees u
    st1 = CascadeState(10 * st0.u, st0.v)
    assert np.array_equal(solve_forward(st1, r0, k1, k2).v.values, tr.v.values)


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(alpha=st.floats(-3, 3), seed=st.integers(0, 2 ** 16))
def test_linearity(small, alpha, seed):
    grid, k1, k2, rates = small
    rng = np.random.default_rng(seed)
    d1 = CascadeState(random_slice(rng, grid), random_slice(rng, grid))
    d2 = CascadeState(random_slice(rng, grid), random_slice(rng, grid))
    g1 = rng.standard_normal((grid.Nt + 1, grid.Na + 1, grid.Nx + 1))
    g2 = rng.standard_normal(g1.shape)
    g1[..., [0, -1]] = g2[..., [0, -1]] = 0
    t1 = solve_forward(d1, rates, k1, k2, control=g1)
    t2 = solve_forward(d2, rates, k1, k2, control=g2)
    t3 = solve_forward(CascadeState(alpha * d1.u + d2.u, alpha * d1.v + d2.v), rates, k1, k2,
                       control=alpha * g1 + g2)
    for a, b, c in ((t1.u, t2.u, t3.u), (t1.v, t2.v, t3.v)):
        ref = alpha * a.values + b.values
        assert np.max(np.abs(c.values - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))


def test_positivity_and_dirichlet(canon):
    st0 = CascadeState(canon.u0, canon.v0)
    tr = solve_forward(st0, canon.rates, canon.k1, canon.k2)
    for traj in (tr.u.values, tr.v.values):
        assert traj.min() >= -1e-12
        assert not np.any(traj[..., 0]) and not np.any(traj[..., -1])


def test_renewal_closure_holds_each_level(canon):
    tr = solve_forward(CascadeState(canon.u0, canon.v0), canon.rates, canon.k1, canon.k2)
    g = canon.grid
    for n in (0, 1, 40, g.Nt):
        s = tr.u.values[n]
        assert np.allclose(s[0], renewal_trace(s, canon.rates.beta1, g), atol=1e-14)


def test_solver_errors(small):
    grid, k1, k2, rates = small
    st0 = CascadeState.zeros(grid)
    bad = np.full((grid.Nt + 1, grid.Na + 1, grid.Nx + 1), np.nan)
    with pytest.raises(FloatingPointError):
        solve_forward(st0, rates, k1, k2, control=bad)
    g = np.zeros_like(bad)
    g[3, 4, 1] = 1.0
    with pytest.raises(ValueError):
        solve_forward(st0, rates, k1, k2, control=g, omega=(0.3, 0.7))
    nonaligned = TensorGrid(2.0, 1.0, 10, 8, 12, aligned=False)
    with pytest.raises(ValueError):
        CascadeScheme(nonaligned, k1, k2, RatePack.constant(nonaligned))
    with pytest.raises(ValueError):
        CascadeState(np.ones((9, 13)), np.zeros((9, 13)))


def test_ratepack_validation():
    g = TensorGrid.aligned_grid(2.0, 1.0, 8, 8)
    with pytest.raises(ValueError):
        RatePack.constant(g, mu11=-0.1)
    with pytest.raises(ValueError):
        RatePack.constant(g, abar1=1.5)
    b = fertility_bump(g, 1.0, 0.5)
    b[2, 3] = 0.1
    with pytest.raises(ValueError):
        RatePack(g, 0.1, 0.1, 1.0, b, b, 0.5, 0.5)
    assert RatePack.constant(g).time_independent("mu11")


def test_renewal_trace_examples():
    g = TensorGrid.aligned_grid(2.0, 1.0, 64, 8)
    assert not np.any(renewal_trace(np.ones((65, 9)), np.zeros((65, 9)), g))
    # smoothly ramped unit fertility past abar=0.5 approximates A - abar
    ramp = np.clip((g.a - 0.5) / 0.05, 0, 1)[:, None] * np.ones((1, 9))
    val = renewal_trace(np.ones((65, 9)), ramp, g)
    assert np.allclose(val, 0.5 - 0.025, atol=2 * g.da ** 2)


def test_renewal_trace_dense_oracle():
    g = TensorGrid.aligned_grid(2.0, 1.0, 512, 4)
    rng = np.random.default_rng(3)
    c = rng.standard_normal(5)
    slice_fn = lambda a: sum(c[q] * np.cos(q * np.pi * a) for q in range(5))
    beta_fn = lambda a: 4.0 * np.sin(np.pi * (a - 0.5) / 0.5) ** 2 if a > 0.5 else 0.0
    beta = fertility_bump(g, 4.0, 0.5)
    sl = np.outer(slice_fn(g.a), np.ones(5))
    ref = quad(lambda a: beta_fn(a) * slice_fn(a), 0.5, 1.0, epsabs=1e-13, limit=200)[0]
    assert np.max(np.abs(renewal_trace(sl, beta, g) - ref)) <= 1e-8


def test_transform_examples():
    g = TensorGrid.aligned_grid(1.0, 1.0, 20, 8)
    rng = np.random.default_rng(4)
    y0, w0, gb, mu = (np.abs(rng.standard_normal((21, 9))) for _ in range(4))
    gam = fertility_bump(g, 2.0, 0.4)
    u0, v0, gg, b1, b2, m21 = transform_model(g, y0, w0, gb, Mortality("inverse_gap", 1.0), Mortality(),
                                              gam, gam, mu)
    j = g.age_index(0.5)
    assert np.allclose(u0[j], 2.0 * y0[j], rtol=1e-14)
    assert np.array_equal(v0, w0)
    # ages past A - eta are clamped (eta defaults to 2 da)
    assert np.allclose(u0[-1] / y0[-1], 1.0 / (2 * g.da))
    z = Mortality()
    u0, v0, gg, b1, b2, m21 = transform_model(g, y0, w0, gb, z, z, gam, gam, mu)
    assert np.array_equal(u0, y0) and np.array_equal(gg, gb) and np.array_equal(b1, gam)
    m = Mortality("constant", 0.7)
    assert np.array_equal(transform_model(g, y0, w0, gb, m, m, gam, gam, mu)[5], mu)
    with pytest.raises(ValueError):
        transform_model(g, y0, w0, gb, z, z, gam, gam, mu, eta=0.0)
    with pytest.raises(ValueError):
        transform_model(g, y0, w0, gb, z, z, -gam - 1, gam, mu)
    with pytest.raises(ValueError):
        Mortality("constant", -1.0)


def test_tabulated_mortality_primitive():
    a = np.linspace(0, 0.9, 91)
    m = Mortality("tabulated", samples=(tuple(a), tuple(2 * a)))
    assert m.primitive(0.5, 1.0) == pytest.approx(0.25, abs=1e-12)


def test_gronwall_zero_and_pure_dissipation(small):
    grid, k1, k2, rates = small
    rep = gronwall_check(solve_forward(CascadeState.zeros(grid), rates, k1, k2), rates, k1, k2)
    assert rep.passed and not np.any(rep.F1) and not np.any(rep.bound1)
    r0 = rates.replace(beta1=0.0)
    rng = np.random.default_rng(5)
    tr = solve_forward(CascadeState(np.abs(random_slice(rng, grid)), random_slice(rng, grid)), r0, k1, k2)
    F1 = gronwall_check(tr, r0, k1, k2).F1
    assert np.all(np.diff(F1) <= 1e-6 * F1[:-1])


def test_gronwall_canonical(canon):
    tr = solve_forward(CascadeState(canon.u0, canon.v0), canon.rates, canon.k1, canon.k2)
    rep = gronwall_check(tr, canon.rates, canon.k1, canon.k2, tol=0.05)
    assert rep.passed1 and rep.passed2
    assert rep.C1 == pytest.approx(16.0)


def test_manufactured_orders():
    k = DegeneracyModel.power_at_0(0.5)
    t = time_order(k)
    s = space_order(k)
    assert abs(t.order - 1.0) <= 0.3
    assert abs(s.order - 2.0) <= 0.3
    assert all(abs(o - 1.0) <= 0.3 for o in t.exact_orders)
