import numpy as np
import pytest
from hypothesis import given, strategies as st

from mfmaxwell import forward as fw
from mfmaxwell import frequency as fq
from mfmaxwell import functionals as fn
from mfmaxwell import reconstruct as rc
from mfmaxwell.grid import Grid, GridError
from mfmaxwell.materials import Illumination, MaterialParams
from mfmaxwell.verify import random_triple

SIX = ("e2", "grad(x1*x2)", "e3", "grad(x2*x3)", "e1", "grad(x1*x3)")
W = 1.5
CENTER = (8, 8, 8)


@pytest.fixture(scope="module")
def constant_case():
    """Constant eps = sigma = 1, L = 2 at n = 16 with covers built from the data."""
    g = Grid(16)
    p = MaterialParams.constant(g)
    ds = fw.synthesize_measurements(p, fw.MeasurementSet((W,), tuple(Illumination.parse(s) for s in SIX)), L=2.0)
    E = [ds.E[(W, i)] for i in range(6)]
    covers = {
        "zeta1": fq.cover_from_values(g, "zeta1", {W: fn.zeta1(g, E[4], E[0], E[2]).coverage_value}),
        "zeta2": fq.cover_from_values(g, "zeta2", {W: fn.zeta2(g, *E).coverage_value}),
        "zeta3": fq.cover_from_values(g, "zeta3", {W: fn.zeta3(g, *E).coverage_value}),
    }
    return ds, covers


# -- linear algebra ------------------------------------------------------------

def test_cross_columns_of_unit_vectors():
    M = rc.cross_columns(np.eye(3))
    e1, e2, e3 = np.eye(3)
    want = np.stack([0 * e1, e3, -e3, 0 * e1, e2, -e1], axis=1)
    assert np.array_equal(M, want)
    assert np.linalg.matrix_rank(M) == 3
    assert np.abs(M @ rc.right_inverse_3x6(M) - np.eye(3)).max() <= 1e-12


@given(st.integers(0, 2 ** 31 - 1))
def test_right_inverse_of_random_rank3(seed):
    M = rc.cross_columns(random_triple(np.random.default_rng(seed)))
    Mp = rc.right_inverse_3x6(M)
    assert np.abs(M @ Mp - np.eye(3)).max() <= 1e-9
    # Moore-Penrose: M+ M is Hermitian
    P = Mp @ M
    assert np.allclose(P, P.conj().T)


@given(st.integers(0, 2 ** 31 - 1))
def test_parallel_triples_are_rank_deficient(seed):
    r = np.random.default_rng(seed)
    a = r.standard_normal(3) + 1j * r.standard_normal(3)
    G = np.outer(a, r.standard_normal(3))
    with pytest.raises(rc.RankDeficientError):
        rc.right_inverse_3x6(rc.cross_columns(G))


def test_coplanar_triple_with_repeated_vector_keeps_rank_three():
    r = np.random.default_rng(5)
    a, c = r.standard_normal((2, 3))
    M = rc.cross_columns(np.stack([a, a, c], axis=1))
    assert np.linalg.matrix_rank(M) == 3
    rc.right_inverse_3x6(M)


def test_right_inverse_batched_and_shape_check():
    r = np.random.default_rng(0)
    Ms = np.stack([rc.cross_columns(random_triple(r)) for _ in range(4)])
    assert rc.right_inverse_3x6(Ms).shape == (4, 6, 3)
    with pytest.raises(ValueError):
        rc.right_inverse_3x6(np.zeros((3, 5)))


# -- transport systems ---------------------------------------------------------

def _cell_field(g, f):
    X = g.cell_coords()
    return np.stack([np.broadcast_to(c, g.cell_shape) for c in f(*X)]).astype(complex)


def test_build_M1_on_rotation_fields():
    g = Grid(10)
    # H_i = e_i x x / 2 has curl H_i = e_i
    H = [_cell_field(g, lambda x, y, z: (0 * x, -z / 2, y / 2)),
         _cell_field(g, lambda x, y, z: (z / 2, 0 * x, -x / 2)),
         _cell_field(g, lambda x, y, z: (-y / 2, x / 2, 0 * x))]
    s = rc.build_M1(g, H, 1.0, s_lin=1e-6)
    assert np.allclose(s.M[(Ellipsis, 0, 0, 0)], rc.cross_columns(np.eye(3)))
    assert s.admissible.all()


def test_build_M1_parallel_curls_give_empty_mask():
    g = Grid(10)
    H = _cell_field(g, lambda x, y, z: (0 * x, -z / 2, y / 2))
    s = rc.build_M1(g, [H, 2 * H, -H], 1.0, s_lin=1e-6)
    assert not s.admissible.any()


def test_build_M1_requires_a_band():
    g = Grid(6)
    with pytest.raises(GridError):
        rc.build_M1(g, [np.zeros((3, 6, 6, 6))] * 3, 1.0)


def test_build_M2_equal_fields_give_empty_mask():
    g = Grid(10)
    H = _cell_field(g, lambda x, y, z: (x * y, z, x + z * z))
    s = rc.build_M2_and_rhs(g, [H] * 6, 1.0, det_floor=1e-12)
    assert np.allclose(s.strength, 0) and not s.admissible.any()


def test_constant_data_give_full_masks(constant_case):
    ds, _ = constant_case
    g = ds.grid
    s1 = rc.build_M1(g, [ds.H[(W, i)] for i in (4, 0, 2)], W)
    s2 = rc.build_M2_and_rhs(g, [ds.H[(W, i)] for i in range(6)], W)
    assert s1.admissible.all() and s2.admissible.all()
    # gradient of a constant q vanishes: alpha q + beta q^2 = 0 and G = 0
    q = W + 1j
    assert np.abs(s1.alpha * q + s1.beta * q * q).max() < 1e-6
    assert np.abs(s2.alpha).max() < 1e-4


def test_rk4_matches_closed_form():
    # y' = a y with a linear in t has y(h) = y0 exp(h (a0 + a1) / 2)
    a0, a1, h = 0.7 + 0.2j, -0.3 + 0.5j, 0.1
    y = rc._rk4(np.array([1.3 + 0.1j]), 1, a0, a1, 0.0, 0.0, h)
    assert y[0] == pytest.approx((1.3 + 0.1j) * np.exp(h * (a0 + a1) / 2), rel=1e-9)
    # logistic-type y' = b y^2 with constant b
    y = rc._rk4(np.array([0.5]), 1, 0.0, 0.0, 0.4, 0.4, h)
    assert y[0] == pytest.approx(0.5 / (1 - 0.4 * 0.5 * h), rel=1e-9)


def test_grow_recovers_exponential_profile():
    g = Grid(12)
    shape = g.band_shape
    a = np.array([0.3, -0.5, 0.8])
    sys_ = rc.TransportSystem("method2", 1.0, None, np.broadcast_to(a[:, None, None, None], (3,) + shape).astype(complex),
                              None, np.ones(shape, bool), np.ones(shape))
    value, known, order, fused, div = rc.grow(g, {1.0: sys_}, {1.0: sys_.admissible}, {1.0: sys_.strength},
                                              (0, 0, 0), 1.0 + 0j, lambda p, w: p, lambda y, w: y,
                                              lambda y: np.isfinite(y))
    idx = np.indices(shape) * g.h
    want = np.exp(np.tensordot(a, idx, axes=1))
    assert known.all() and div == 0
    assert np.abs(value - want).max() < 1e-8
    assert order[0, 0, 0] == 0 and order.max() == sum(s - 1 for s in shape)


def test_grow_stays_inside_the_mask():
    g = Grid(12)
    shape = g.band_shape
    mask = np.ones(shape, bool)
    mask[4] = False                       # a wall splits the band
    sys_ = rc.TransportSystem("method2", 1.0, None, np.zeros((3,) + shape, complex), None, mask, np.ones(shape))
    _, known, order, _, _ = rc.grow(g, {1.0: sys_}, {1.0: mask}, {1.0: np.ones(shape)}, (0, 0, 0), 1.0 + 0j,
                                    lambda p, w: p, lambda y, w: y, lambda y: np.isfinite(y))
    assert known[:4].all() and not known[4:].any()
    assert (order[4:] == -1).all()


def test_grow_switches_frequency_across_overlapping_regions():
    g = Grid(12)
    shape = g.band_shape
    lo = np.zeros(shape, bool)
    lo[:5] = True
    hi = np.zeros(shape, bool)
    hi[3:] = True
    mk = lambda m: rc.TransportSystem("method1", 1.0, None, np.zeros((3,) + shape, complex), None, m, np.ones(shape))  # noqa: E731
    systems = {1.0: mk(lo), 2.0: mk(hi)}
    p0 = 1.0 + 2.0j  # (eps, sigma)
    value, known, _, fused, _ = rc.grow(g, systems, {1.0: lo, 2.0: hi}, {1.0: lo * 1.0, 2.0: hi * 1.0},
                                        (0, 0, 0), p0, rc._q_local, rc._q_global, lambda y: y.imag > 0)
    assert known.all() and np.allclose(value, p0)
    assert np.isnan(fused[0, 0, 0])      # the seed has no incoming edge
    assert set(np.unique(fused[~np.isnan(fused)])) == {1.0, 2.0}


# -- pipelines -----------------------------------------------------------------

def test_method1_constant_coefficients(constant_case):
    ds, cov = constant_case
    rep = rc.integrate_method1(ds, cov["zeta1"], rc.SeedValue(CENTER, eps=1.0, sigma=1.0), illuminations=(4, 0, 2))
    assert rep.valid.all()
    assert rep.metrics["eps_rel_linf"] <= 1e-2 and rep.metrics["sigma_rel_linf"] <= 1e-2
    assert np.all(rep.sigma[rep.valid] >= 0)


def test_method2_constant_coefficients(constant_case):
    ds, cov = constant_case
    rep = rc.integrate_method2(ds, cov["zeta2"], rc.SeedValue(CENTER, q=W + 1j, omega=W))
    assert rep.metrics["eps_rel_linf"] <= 1e-2 and rep.metrics["sigma_rel_linf"] <= 1e-2


def test_wrong_seed_changes_the_result(constant_case):
    ds, cov = constant_case
    rep = rc.integrate_method1(ds, cov["zeta1"], rc.SeedValue(CENTER, q=2 * (W + 1j), omega=W),
                               illuminations=(4, 0, 2))
    assert rep.metrics["sigma_rel_linf"] > 0.5


def test_electroseismic_constant_L(constant_case):
    ds, cov = constant_case
    rep = rc.electroseismic_pipeline(ds, cov["zeta3"], rc.SeedValue(CENTER, L=2.0))
    L = rep.L[np.isfinite(rep.L)]
    assert np.abs(L - 2).max() <= 0.02
    assert rep.metrics["eps_rel_linf"] <= 0.05 and rep.metrics["sigma_rel_linf"] <= 0.05
    # q needs the curl-curl stencil, so its set sits strictly inside the L set
    assert rep.valid.sum() < np.isfinite(rep.L).sum()


def test_electroseismic_step2_reproduces_E(constant_case):
    ds, cov = constant_case
    rep = rc.electroseismic_pipeline(ds, cov["zeta3"], rc.SeedValue(CENTER, L=2.0))
    g = ds.grid
    D = ds.D[(W, 0)][(Ellipsis,) + g.band]
    E = ds.E[(W, 0)][(Ellipsis,) + g.band]
    ok = np.isfinite(rep.L)
    assert np.abs(D[:, ok] / rep.L[ok] - E[:, ok]).max() <= 0.02 * np.abs(E).max()


def test_electroseismic_without_L_seed_still_gives_q(constant_case):
    ds, cov = constant_case
    rep = rc.electroseismic_pipeline(ds, cov["zeta3"], rc.SeedValue(CENTER))
    assert rep.metrics["sigma_rel_linf"] <= 0.05
    assert any("constant factor" in n for n in rep.notes)


def test_seed_validation(constant_case):
    ds, cov = constant_case
    with pytest.raises(rc.ReconstructionError):
        rc.integrate_method1(ds, cov["zeta1"], rc.SeedValue((0, 0, 0), eps=1.0, sigma=1.0), illuminations=(4, 0, 2))
    with pytest.raises(rc.ReconstructionError):
        rc.integrate_method1(ds, cov["zeta1"], rc.SeedValue(CENTER), illuminations=(4, 0, 2))
    with pytest.raises(rc.ReconstructionError):
        rc.electroseismic_pipeline(ds, cov["zeta3"], rc.SeedValue(CENTER, L=-1.0))


def test_outside_cover_is_never_filled(constant_case):
    ds, cov = constant_case
    c = cov["zeta2"]
    masks = {w: m.copy() for w, m in c.masks.items()}
    masks[W][:, :, 8:] = False      # band index 8 is grid index 10
    cut = fq.CoverReport(c.zeta, c.grid, c.K, c.s, c.values, masks, c.labels, c.n_components, c.coverage)
    rep = rc.integrate_method2(ds, cut, rc.SeedValue(CENTER, eps=1.0, sigma=1.0))
    assert not rep.valid[:, :, 8:].any()
    assert np.isnan(rep.sigma[:, :, 8:]).all()


def test_reports_are_deterministic(constant_case):
    ds, cov = constant_case
    seed = rc.SeedValue(CENTER, eps=1.0, sigma=1.0)
    a = rc.integrate_method2(ds, cov["zeta2"], seed)
    b = rc.integrate_method2(ds, cov["zeta2"], seed)
    assert np.array_equal(a.sigma, b.sigma, equal_nan=True) and np.array_equal(a.order, b.order)


def test_presmooth_off_and_on(constant_case):
    ds, _ = constant_case
    assert rc.presmooth(ds, 0.0) is ds
    noisy = fw.synthesize_measurements(ds.params, fw.MeasurementSet((W,), ds.measurements.illuminations[:1]),
                                       noise=0.05, seed=3, L=2.0)
    sm = rc.presmooth(noisy, 1.0)
    b = ds.grid.band
    clean = ds.H[(W, 0)][(Ellipsis,) + b]
    err = lambda d: np.abs(d.H[(W, 0)][(Ellipsis,) + b] - clean).max()  # noqa: E731
    assert err(sm) < 0.5 * err(noisy)
    assert set(sm.D) == set(noisy.D) and sm.E is noisy.E
    with pytest.raises(ValueError):
        rc.presmooth(ds, -1.0)
