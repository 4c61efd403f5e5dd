import numpy as np
import pytest

from mfmaxwell.grid import Grid
from mfmaxwell.materials import Bump, Illumination, MaterialError, MaterialParams, ScalarSpec


def test_bump_peak_and_decay():
    b = Bump((0.5, 0.5, 0.5), 0.2, 0.3)
    assert b(0.5, 0.5, 0.5) == pytest.approx(0.3)
    assert b(0.7, 0.5, 0.5) == pytest.approx(0.3 * np.exp(-1))


def test_scalar_spec_sampling():
    g = Grid(6)
    s = ScalarSpec(2.0, (Bump(amplitude=0.5),)).sample(g)
    assert s.shape == g.cell_shape and s.min() > 2.0 and s.max() < 2.5


def test_params_validate_positivity_and_bounds():
    g = Grid(4)
    with pytest.raises(MaterialError):
        MaterialParams.constant(g, sigma=0.0)
    with pytest.raises(MaterialError):
        MaterialParams.constant(g, eps=-1.0)
    with pytest.raises(MaterialError):
        MaterialParams.constant(g, sigma=0.5, lambda_min=0.8)
    with pytest.raises(MaterialError):
        MaterialParams(g, np.ones((3, 3, 3)), np.ones(g.cell_shape), np.ones(g.cell_shape))


def test_params_are_read_only_and_q():
    p = MaterialParams.constant(Grid(4), eps=2.0, sigma=3.0)
    with pytest.raises(ValueError):
        p.sigma[0, 0, 0] = 5
    assert np.allclose(p.q(0.5), 1.0 + 3.0j)


@pytest.mark.parametrize("text,vec", [("e1", (1, 0, 0)), ("e3", (0, 0, 1)), ("[1, 2, -1]", (1, 2, -1))])
def test_constant_illuminations(text, vec):
    ill = Illumination.parse(text)
    x = np.array([0.1, 0.7])
    for k in range(3):
        assert np.allclose(ill.field(k, x, x, x), vec[k])
    assert ill.kind == "constant_vector"


def test_gradient_illumination_field_and_potential():
    ill = Illumination.parse("grad(x1*x2)")
    assert ill.field(0, 0.2, 0.5, 0.9) == pytest.approx(0.5)
    assert ill.field(1, 0.2, 0.5, 0.9) == pytest.approx(0.2)
    assert ill.potential(0.2, 0.5, 0.9) == pytest.approx(0.1)


def test_illumination_errors():
    with pytest.raises(MaterialError):
        Illumination.parse("grad(x1**3)")
    with pytest.raises(MaterialError):
        Illumination.parse("e4")


def test_edge_values_are_tangential_samples():
    g = Grid(3)
    v = Illumination.parse("grad(x1*x2)").edge_values(g)
    assert v.shape == (g.n_edges,)
    x, y, z = g.edge_coords(0)
    assert np.allclose(v[:g.n_edges_axis], y.ravel())
