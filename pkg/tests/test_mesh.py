import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import beta as beta_fn

from degcascade.coefficients import DegeneracyModel
from degcascade.mesh import (Field, Region, TensorGrid, cylinder_integral, field_from_csv, field_to_csv,
                             hardy_ratio, pairing, restrict, weighted_l2)
from degcascade.presets import sine_bubbles

SQ = DegeneracyModel.power_at_0(0.5)
ONE = DegeneracyModel.constant(1.0)


def quad_grid(Nx, Na=4, A=1.0):
    return TensorGrid(1.0, A, 4, Na, Nx, aligned=False)


def test_grid_invariants():
    with pytest.raises(ValueError):
        TensorGrid(1.0, 1.0, 3, 4, 4)
    with pytest.raises(ValueError):
        TensorGrid(2.0, 1.0, 40, 40, 8)            # dt != da
    g = TensorGrid.aligned_grid(2.0, 1.0, 40, 60)
    assert g.Nt == 80 and g.dt == g.da
    with pytest.raises(ValueError):
        TensorGrid.aligned_grid(1.0, 3.0, 10, 8)


def test_graded_mesh_clusters_at_zero():
    g = TensorGrid(1.0, 1.0, 4, 4, 16, grading=2.0)
    assert g.x[0] == 0 and g.x[-1] == 1 and g.h[0] < g.h[-1]


def test_weighted_l2_examples():
    g = quad_grid(64)
    assert weighted_l2(np.zeros((5, 65)), g, SQ) == 0.0
    f = np.tile(g.x, (5, 1))
    assert weighted_l2(f, g, DegeneracyModel.power_at_0(1.0)) == pytest.approx(0.5, abs=1e-14)


def test_weighted_l2_against_adaptive_quadrature():
    g = quad_grid(256)
    f = np.tile(np.sin(np.pi * g.x), (5, 1))
    ref, _ = quad(lambda x: np.sin(np.pi * x) ** 2 / np.sqrt(x), 0, 1, limit=200)
    assert abs(weighted_l2(f, g, SQ) - ref) < 1e-4


def test_weighted_l2_second_order():
    # f = x(1-x), k = x^0.5: exact integral B(2.5, 3)
    exact = beta_fn(2.5, 3.0)
    errs = []
    for Nx in (32, 64, 128):
        g = quad_grid(Nx)
        errs.append(abs(weighted_l2(np.tile(g.x * (1 - g.x), (5, 1)), g, SQ) - exact))
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(3.5 < r < 4.5 for r in ratios)


@settings(max_examples=30, deadline=None)
@given(c=st.floats(-50, 50), seed=st.integers(0, 2 ** 16))
def test_weighted_l2_homogeneous(c, seed):
    g = quad_grid(16)
    f = np.random.default_rng(seed).standard_normal((5, 17))
    a, b = weighted_l2(c * f, g, SQ), weighted_l2(f, g, SQ)
    assert a == pytest.approx(c * c * b, rel=1e-12, abs=1e-300)


def test_restrict_indicator_measure():
    g = quad_grid(100, A=1.0)
    f = restrict(np.ones((5, 101)), g, Region(x=(0.3, 0.7)))
    assert weighted_l2(f, g, ONE) == pytest.approx(0.4, abs=1e-12)
    assert np.all(f.masked()[:, 20] == 0) and np.all(f.masked()[:, 50] == 1)


def test_restrict_nested():
    g = quad_grid(40)
    f = np.random.default_rng(0).standard_normal((5, 41))
    outer, inner = Region(a=(0.0, 0.8), x=(0.1, 0.9)), Region(a=(0.2, 0.6), x=(0.3, 0.7))
    twice = restrict(restrict(f, g, outer), g, inner)
    once = restrict(f, g, inner)
    assert twice.region == once.region
    assert weighted_l2(twice, g, SQ) == weighted_l2(once, g, SQ)
    assert np.array_equal(twice.masked(), once.masked())


def test_cylinder_integral_empty_and_bounds():
    g = quad_grid(16)
    tr = np.ones((5, 5, 17))
    assert cylinder_integral(tr, g, SQ, window=(0.5, 0.5)) == 0.0
    with pytest.raises(ValueError):
        cylinder_integral(tr, g, SQ, window=(0.0, 1.5))


def test_cylinder_integral_singular_closed_form():
    # int 1/sqrt(x) = 2; the midpoint rule converges like Nx^(-1/2) for this integrand
    vals = {}
    for Nx in (1024, 4096):
        g = quad_grid(Nx)
        vals[Nx] = cylinder_integral(np.ones((5, 5, Nx + 1)), g, SQ, window=(0.0, 1.0))
    order = np.log((2 - vals[1024]) / (2 - vals[4096])) / np.log(4)
    assert order == pytest.approx(0.5, abs=0.05)
    extrapolated = 2 * vals[4096] - vals[1024]              # Richardson with order 1/2, ratio 4
    assert extrapolated == pytest.approx(2.0, abs=1e-4)
    assert abs(vals[4096] - 2.0) < 0.6049 / np.sqrt(4096) * 1.01


def test_hardy_examples():
    x = np.linspace(0, 1, 257)
    assert hardy_ratio(x * (1 - x), x) == pytest.approx(1.0, abs=0.02)
    assert hardy_ratio(np.sin(np.pi * x), x) < 4
    rng = np.random.default_rng(7)
    assert max(hardy_ratio(sine_bubbles(rng, x), x) for _ in range(100)) <= 4 * 1.05
    with pytest.raises(ValueError):
        hardy_ratio(np.zeros(17))
    with pytest.raises(ValueError):
        hardy_ratio(x)


def test_pairing_symmetric_positive():
    g = TensorGrid.aligned_grid(2.0, 1.0, 8, 12)
    rng = np.random.default_rng(1)
    f, h = rng.standard_normal((2, 9, 13))
    assert pairing(f, h, g, SQ) == pytest.approx(pairing(h, f, g, SQ), rel=1e-14)
    assert pairing(f, f, g, SQ) > 0


def test_field_csv_roundtrip(tmp_path):
    g = TensorGrid.aligned_grid(2.0, 1.0, 4, 6)
    f = np.random.default_rng(2).standard_normal((5, 7))
    field_to_csv(tmp_path / "f.csv", f, g)
    assert np.array_equal(field_from_csv(tmp_path / "f.csv", g), f)
    head = (tmp_path / "f.csv").read_text().splitlines()[0]
    assert head == "t,a,x,value"
