import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.classes.ScalarField import intrinsic_derivatives, parse_field, validate_positivity
from src.classes.SphereModel import RoundSphereModel, SpherePoint, TangentFrame
from src.utils.exceptions import EvaluationDomain, FieldSyntaxError, NotPositive, UnknownIdentifier
from src.utils.geo_utils import sobol_sphere_points

MIXED = "exp(x1)*sin(x2) + x3/(2 + x4^2) - cos(x5)^3 + 0.5*x1*x5"


def mixed_numpy(x):
    return np.exp(x[0]) * np.sin(x[1]) + x[2] / (2 + x[3] ** 2) - np.cos(x[4]) ** 3 + 0.5 * x[0] * x[4]


@pytest.mark.parametrize(
    "src, expected",
    [
        ("-x1^2", -4.0),
        ("2^3^2", 512.0),
        ("2 - 3 - 4", -5.0),
        ("8/4/2", 1.0),
        ("1 + 2*3", 7.0),
        ("(1 + 2)*3", 9.0),
        ("--x1", 2.0),
        ("1.5e1 + .5", 15.5),
    ],
)
def test_precedence(src, expected):
    x = np.array([2.0, 0.0, 0.0, 0.0, 0.0])
    assert_allclose(parse_field(src).value(x), expected)


def test_value_matches_numpy():
    f = parse_field(MIXED)
    X = sobol_sphere_points(32, seed=4)
    assert_allclose(f.value(X), [mixed_numpy(x) for x in X], rtol=1e-14)


def test_gradient_matches_finite_differences():
    f = parse_field(MIXED)
    h = 1e-6
    for x in sobol_sphere_points(8, seed=9):
        fd = np.array([(mixed_numpy(x + h * e) - mixed_numpy(x - h * e)) / (2 * h) for e in np.eye(5)])
        assert_allclose(f.gradient(x), fd, atol=1e-8)


def test_hessian_matches_finite_differences():
    f = parse_field(MIXED)
    h = 1e-5
    for x in sobol_sphere_points(8, seed=11):
        H = f.hessian(x)
        assert_allclose(H, H.T, atol=0)
        fd = np.array([(f.gradient(x + h * e) - f.gradient(x - h * e)) / (2 * h) for e in np.eye(5)])
        assert_allclose(H, fd, atol=1e-7)


@pytest.mark.parametrize("src", ["", "   ", "x1 +", "x1 x2", "(x1 + 2", "2 *", "x1^0.5", "x1 ^ x2"])
def test_syntax_errors(src):
    with pytest.raises(FieldSyntaxError) as e:
        parse_field(src)
    assert e.value.expected


@pytest.mark.parametrize("src, name", [("x6", "x6"), ("1 + y", "y"), ("foo(x1)", "foo"), ("x0*2", "x0")])
def test_unknown_identifier(src, name):
    with pytest.raises(UnknownIdentifier) as e:
        parse_field(src)
    assert e.value.name == name


def test_division_by_vanishing_denominator():
    f = parse_field("1/x1")
    north = np.array([0.0, 0.0, 0.0, 0.0, 1.0])
    with pytest.raises(EvaluationDomain):
        f.value(north)
    assert np.isnan(f.value(north, strict=False))


def test_structure_flags():
    assert parse_field("3").is_constant
    assert parse_field("2 + x5").is_affine
    assert parse_field("2 + 0.5*x1 - x5").is_affine
    assert not parse_field("3 + x5^2").is_affine
    assert not parse_field("2 + x5").is_constant


def test_rotated_field(rotation):
    f = parse_field(MIXED)
    g = f.rotated(rotation)
    X = sobol_sphere_points(16, seed=12)
    assert_allclose(g.value(X @ rotation.T), f.value(X), rtol=1e-12, atol=1e-12)


def test_scaled_field():
    f = parse_field(MIXED)
    X = sobol_sphere_points(8, seed=13)
    assert_allclose(f.scaled(2.5).value(X), 2.5 * f.value(X))


def test_intrinsic_derivatives_affine_north():
    f = parse_field("2 + x5")
    a = SpherePoint([0, 0, 0, 0, 1])
    d = intrinsic_derivatives(f, a, TangentFrame.at(a))
    assert d.value == 3.0
    assert_allclose(d.grad, np.zeros(4), atol=0)
    assert_allclose(d.hess, -np.eye(4), atol=1e-15)
    assert_allclose(d.laplace_beltrami, -4.0)


def test_laplace_beltrami_of_first_spherical_harmonic():
    # x5 is an eigenfunction of -Delta on S^4 with eigenvalue 4
    f = parse_field("x5")
    for x in sobol_sphere_points(8, seed=14):
        a = SpherePoint(x)
        d = intrinsic_derivatives(f, a, TangentFrame.at(a))
        assert_allclose(d.laplace_beltrami, -4.0 * x[4], atol=1e-13)


def test_laplace_beltrami_of_quadratic_harmonics():
    # x_i x_j (i != j) is a degree 2 spherical harmonic: -Delta = 2 * (2 + 3)
    rng = np.random.default_rng(21)
    X = rng.normal(size=(100, 5))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    for i, j in [(1, 2), (3, 5), (2, 4)]:
        f = parse_field(f"x{i}*x{j}")
        for x in X:
            a = SpherePoint(x)
            d = intrinsic_derivatives(f, a, TangentFrame.at(a))
            assert_allclose(d.laplace_beltrami, -10.0 * x[i - 1] * x[j - 1], atol=1e-12)


def test_laplace_beltrami_of_x5_squared_at_north():
    a = SpherePoint([0, 0, 0, 0, 1])
    d = intrinsic_derivatives(parse_field("x5^2"), a, TangentFrame.at(a))
    assert_allclose(d.laplace_beltrami, -8.0, atol=1e-14)


def homogeneous_laplacian_fd(f, x, h=1e-4):
    """Flat Laplacian in R^5 of the degree 0 extension x -> f(x / |x|), by central differences."""
    def F(y):
        return f.value(y / np.linalg.norm(y, axis=-1, keepdims=True))

    steps = h * np.eye(5)
    return float(np.sum(F(x + steps) - 2.0 * F(x) + F(x - steps)) / h**2)


@pytest.mark.parametrize("source", [MIXED, "3 + x5^2 + 0.5*x4^2 + 0.25*x3^2 + 0.125*x2^2 + 0.0625*x1^2"])
def test_laplace_beltrami_matches_homogeneous_extension(source):
    f = parse_field(source)
    for x in sobol_sphere_points(16, seed=22):
        a = SpherePoint(x)
        d = intrinsic_derivatives(f, a, TangentFrame.at(a))
        assert_allclose(d.laplace_beltrami, homogeneous_laplacian_fd(f, x), atol=1e-5)


def test_positivity_quadric(quadric_5):
    report = validate_positivity(quadric_5, RoundSphereModel(), samples=512)
    assert_allclose(report.min_value, 3.0625, rtol=1e-9)
    assert_allclose(abs(report.location[0]), 1.0, atol=1e-4)


def test_positivity_rejects_negative_values():
    with pytest.raises(NotPositive) as e:
        validate_positivity(parse_field("0.5 + x5"), RoundSphereModel(), samples=256)
    assert_allclose(e.value.value, -0.5, atol=1e-9)
    assert_allclose(e.value.witness[4], -1.0, atol=1e-4)
