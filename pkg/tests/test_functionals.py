import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st

from mfmaxwell import functionals as fn
from mfmaxwell.grid import Grid, GridError
from mfmaxwell.materials import COORDS, Illumination
from mfmaxwell.verify import eta_scaling_error, eta_symbolic

SEEDS = st.integers(0, 2 ** 31 - 1)


def _cvec(r, *shape):
    return r.standard_normal(shape) + 1j * r.standard_normal(shape)


@given(SEEDS)
def test_det3_matches_numpy(seed):
    r = np.random.default_rng(seed)
    A = _cvec(r, 3, 3)
    assert fn.det3(A[:, 0], A[:, 1], A[:, 2]) == pytest.approx(np.linalg.det(A))


@given(SEEDS)
def test_eta_antisymmetric_and_bilinear(seed):
    r = np.random.default_rng(seed)
    u1, u2, u3 = (_cvec(r, 3, 5) for _ in range(3))
    J1, J2, J3 = (_cvec(r, 3, 3, 5) for _ in range(3))
    a = complex(*r.standard_normal(2))
    e12 = fn.eta_kernel(u1, J1, u2, J2)
    assert np.allclose(e12, -fn.eta_kernel(u2, J2, u1, J1))
    assert np.allclose(fn.eta_kernel(a * u1 + u3, a * J1 + J3, u2, J2), a * e12 + fn.eta_kernel(u3, J3, u2, J2))
    assert np.allclose(fn.eta_kernel(u1, J1, u1, J1), 0)


@given(SEEDS)
def test_gamma_antisymmetric(seed):
    r = np.random.default_rng(seed)
    u1, u2, l1, l2, g1, g2 = (_cvec(r, 3, 4) for _ in range(6))
    assert np.allclose(fn.gamma_kernel(u1, l1, g1, u2, l2, g2), -fn.gamma_kernel(u2, l2, g2, u1, l1, g1))


def test_eta_scaling_symbolic_oracle():
    x1, x2, x3 = COORDS
    u = (x1 * x2, x3 ** 2 - x1, 1 + x2)
    v = (x2 - x3, x1 ** 2, x1 * x3)
    q = 1 + x1 + 2 * sympy.I * x2 * x3
    diff = eta_symbolic([q * c for c in u], [q * c for c in v]) - q ** 2 * eta_symbolic(u, v)
    assert sympy.simplify(diff) == sympy.zeros(3, 1)
    assert eta_scaling_error(u, v, q) <= 1e-8


def test_eta_full_matches_symbolic_on_quadratics():
    x1, x2, x3 = COORDS
    g = Grid(9)
    u = (x1 * x2, x3 ** 2, x1 + x2 * x3)
    v = (x2 ** 2, x1 - x3, x1 * x3)
    ex = sympy.lambdify(COORDS, list(eta_symbolic(u, v)), "numpy")
    X = g.cell_coords()
    field = lambda w: np.stack([np.broadcast_to(c, g.cell_shape) for c in sympy.lambdify(COORDS, list(w))(*X)])  # noqa: E731
    got = fn.eta(g, field(u).astype(complex), field(v).astype(complex))
    want = np.stack([np.broadcast_to(c, g.cell_shape) for c in ex(*X)])[(Ellipsis,) + g.band]
    assert np.allclose(got, want, atol=1e-10)


def _static(g, names):
    X = g.cell_coords()
    return [np.stack([Illumination.parse(s).field(k, *X) for k in range(3)]) for s in names]


def test_zeta1_of_unit_vectors_is_one():
    g = Grid(8)
    v = fn.zeta1(g, *_static(g, ("e1", "e2", "e3"))).coverage_value
    assert np.allclose(v, 1.0, atol=1e-14)


def test_zeta2_of_static_sextuple_is_one():
    g = Grid(8)
    six = _static(g, ("e2", "grad(x1*x2)", "e3", "grad(x2*x3)", "e1", "grad(x1*x3)"))
    assert np.allclose(fn.zeta2_value(g, six), 1.0, atol=1e-12)


def test_zeta3_second_condition_reads_second_component():
    g = Grid(8)
    six = _static(g, ("e2", "grad(x1*x2)", "e3", "grad(x2*x3)", "e1", "grad(x1*x3)"))
    cf = fn.zeta3(g, *six)
    assert cf.r == 2 and np.allclose(cf.values[1], 1.0)
    six[0] = 0.5 * six[0]
    assert np.allclose(fn.zeta3(g, *six).coverage_value, 0.5)


def test_equal_fields_give_zero_zeta2():
    g = Grid(8)
    E = _static(g, ("grad(x1*x2)",))[0]
    assert np.allclose(fn.zeta2_value(g, [E] * 6), 0)


def test_condition_field_validation():
    g = Grid(8)
    with pytest.raises(GridError):
        fn.ConditionField(g, np.ones((1, 3, 3, 3)))
    bad = np.ones((1,) + g.band_shape)
    bad[0, 0, 0, 0] = np.nan
    with pytest.raises(GridError):
        fn.ConditionField(g, bad)


def test_evaluate_checks_field_count():
    g = Grid(8)
    with pytest.raises(ValueError):
        fn.evaluate("zeta2", g, _static(g, ("e1", "e2", "e3")))
