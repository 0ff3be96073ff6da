import numpy as np
import pytest

from fpblock import (
    ConfigurationError,
    Grid,
    mmo_model,
    model_by_name,
    ring_exact_density,
    ring_model,
    rossler_model,
    zero_drift_model,
)
from oracles import grid_quadrature, ring_normalizer_closed_form


def test_ring_drift_hand_value():
    m = ring_model(epsilon=1.0)
    # at (2,0): x(x^2+y^2-1) = 6, so (-4*6 + 0, -0 - 2)
    assert m.drift(np.array([2.0, 0.0])) == pytest.approx([-24.0, -2.0])


def test_ring_drift_is_batch_friendly():
    m = ring_model()
    pts = np.array([[2.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
    out = m.drift(pts)
    assert out.shape == (3, 2)
    assert out[0] == pytest.approx([-24.0, -2.0])
    assert out[1] == pytest.approx([0.0, 0.0])
    g = 4.0 * (1.0 + 1.0 - 1.0)
    assert out[2] == pytest.approx([-g + 1.0, -g - 1.0])


def test_zero_drift_model():
    m = zero_drift_model(3)
    pts = np.random.default_rng(0).normal(size=(5, 3))
    assert np.all(m.drift(pts) == 0.0)
    assert m.dim == 3


def test_ring_normalizer_matches_closed_form():
    # two independent quadrature routes for K must agree tightly
    for eps in (1.0, 0.7, 1.3):
        dens = ring_exact_density(epsilon=eps)
        k_closed = ring_normalizer_closed_form(eps)
        # evaluate at the ring where V = 0: density is exactly 1/K
        val = float(dens(np.array([1.0, 0.0])))
        assert val == pytest.approx(1.0 / k_closed, rel=1e-9)


def test_ring_density_integrates_to_one():
    dens = ring_exact_density(epsilon=1.0)
    g = Grid((-3.0, -3.0), (3.0, 3.0), (100, 100))
    total = grid_quadrature(dens, g, order=3)
    # the tail outside [-3,3]^2 is below 1e-6
    assert total == pytest.approx(1.0, abs=2e-6)


def test_ring_density_radial_symmetry():
    dens = ring_exact_density()
    a = dens(np.array([1.2, 0.0]))
    b = dens(np.array([0.0, 1.2]))
    c = dens(np.array([1.2 / np.sqrt(2), 1.2 / np.sqrt(2)]))
    assert a == pytest.approx(b, rel=1e-12)
    assert a == pytest.approx(c, rel=1e-12)


def test_rossler_drift_values():
    m = rossler_model()
    assert m.epsilon == 0.1
    assert m.dim == 3
    out = m.drift(np.array([5.7, 0.0, 1.0]))
    # (-y - z, x + a y, b + z(x - c)) at (5.7, 0, 1)
    assert out == pytest.approx([-1.0, 5.7, 0.2])


def test_mmo_drift_values():
    m = mmo_model()
    out = m.drift(np.array([0.0, 0.0, 0.0]))
    assert out == pytest.approx([0.0, 0.0, -0.0072168])
    # the fast component vanishes on the critical manifold y = x^2 + x^3
    for x in (-1.0, -0.5, 0.25):
        p = np.array([x, x**2 + x**3, 0.3])
        assert m.drift(p)[0] == pytest.approx(0.0, abs=1e-12)


def test_mmo_fast_variable_scaling():
    m = mmo_model()
    p = np.array([0.0, 0.01, 0.0])
    # y offset of 0.01 is amplified by 1/eta = 100
    assert m.drift(p)[0] == pytest.approx(1.0)


def test_model_by_name():
    assert model_by_name("ring").name == "ring"
    assert model_by_name("rossler", epsilon=0.05).epsilon == 0.05
    assert model_by_name("mmo").dim == 3
    with pytest.raises(ConfigurationError) as err:
        model_by_name("lorenz")
    assert "ring" in str(err.value)


def test_epsilon_must_be_positive():
    with pytest.raises(ConfigurationError):
        ring_model(epsilon=0.0)
    with pytest.raises(ConfigurationError):
        zero_drift_model(2, epsilon=-1.0)
