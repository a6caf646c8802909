import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.classes.Bubble import (
    C2_EXACT,
    S4_EXACT,
    Bubble,
    QuadratureConfig,
    compute_constants,
    critical_level,
    derive_c0,
    epsilon_ij,
    pde_residual,
    relative_residual_fd,
)


def test_constants_by_quadrature():
    c = compute_constants()
    assert_allclose(c.S4, 32 * math.pi**2 / 3, rtol=1e-9)
    assert_allclose(c.c2, 32 * math.pi**2, rtol=1e-9)
    assert_allclose(c.omega3, 2 * math.pi**2, rtol=1e-15)
    assert_allclose(c.c0, 2 * math.sqrt(2), rtol=1e-15)
    assert c.S4_rel_error < 1e-9
    assert c.c2_rel_error < 1e-9
    d = c.to_dict()
    assert d["S4"]["exact"] == S4_EXACT
    assert d["c2"]["exact"] == C2_EXACT
    assert "provenance" in d


def test_constants_with_looser_quadrature():
    c = compute_constants(QuadratureConfig(rel_tol=1e-6, fail_tol=1e-5))
    assert_allclose(c.S4, S4_EXACT, rtol=1e-5)


def test_c0_by_shooting():
    assert_allclose(derive_c0(), 2 * math.sqrt(2), rtol=1e-9)


def test_closed_form_residual():
    r = np.linspace(0, 10, 11)
    assert_allclose(pde_residual(2 * math.sqrt(2), r), 0.0, atol=1e-14)
    assert_allclose(pde_residual(2.0, 0.0), 8.0)


@pytest.mark.parametrize("scale", [0.5, 3.0, 40.0])
def test_bubble_solves_critical_equation(scale):
    b = Bubble(center=np.zeros(4), scale=scale)
    rho = np.linspace(0.0, 50.0, 201)
    assert np.max(relative_residual_fd(b, rho)) < 1e-6


def test_wrong_constant_leaves_residual():
    b = Bubble(center=np.zeros(4), scale=1.0, c0=2.0)
    assert np.min(relative_residual_fd(b, np.linspace(0, 5, 11))) > 0.1


def test_bubble_profile():
    b = Bubble(center=[1.0, 0, 0, 0], scale=2.0)
    assert_allclose(b([1.0, 0, 0, 0]), 2 * math.sqrt(2) * 2.0)
    assert_allclose(b([1.0, 0.5, 0, 0]), b([1.0, 0, -0.5, 0]))
    assert_allclose(b([[1.0, 0, 0, 1.0]]), [2 * math.sqrt(2) * 2.0 / 5.0])


def test_bubble_validation():
    with pytest.raises(ValueError):
        Bubble(center=np.zeros(4), scale=0.0)
    with pytest.raises(ValueError):
        Bubble(center=np.zeros(5), scale=1.0)


def test_epsilon_ij():
    assert epsilon_ij(1.0, 1.0, 0.0) == 0.5
    assert_allclose(epsilon_ij(2.0, 8.0, 0.0), 1 / (0.25 + 4.0))
    assert epsilon_ij(1.0, 1.0, 3.0) < epsilon_ij(1.0, 1.0, 1.0)
    rng = np.random.default_rng(0)
    for li, lj, d in rng.uniform(0.01, 100, size=(50, 3)):
        assert 0 < epsilon_ij(li, lj, d) <= 0.5
    with pytest.raises(ValueError):
        epsilon_ij(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        epsilon_ij(1.0, 1.0, -1.0)


def test_critical_level():
    assert_allclose(critical_level([4.0, 4.0]), math.sqrt(S4_EXACT / 2))
    assert_allclose(critical_level([1.0]), math.sqrt(S4_EXACT))
    with pytest.raises(ValueError):
        critical_level([])
    with pytest.raises(ValueError):
        critical_level([1.0, -2.0])
