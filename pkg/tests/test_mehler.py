import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import ndtr

from hypergauss.gaussian import BlockCovariance, expect_quadrature
from hypergauss.hermite import HermitePoly, allclose, evaluate_many, hermite_basis, random_poly
from hypergauss.mehler import (ExpLinear, HalfspaceIndicator, IntervalUnion, Polynomial,
                               ShiftedPositive, fourier_ratio, mehler_kernel_apply, mehler_transform,
                               mehler_via_smoothing, noise_operator)

seeds = st.integers(0, 2**32 - 1)


def test_transform_endpoints():
    f = random_poly(np.random.default_rng(0), 2, 4)
    assert allclose(mehler_transform(f, 1), f)
    const = mehler_transform(f, 0)
    assert set(const.coeffs) == {(0, 0)}
    assert const.coeffs[(0, 0)] == pytest.approx(f.coeffs.get((0, 0), 0))


def test_imaginary_parameter_on_h2():
    out = mehler_transform(hermite_basis((2,)), 1j * math.sqrt(0.5))
    assert out.coeffs[(2,)] == pytest.approx(-0.5)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_coefficient_rule_matches_smoothing_route(seed, re, im):
    f = random_poly(np.random.default_rng(seed), 2, 4)
    z = complex(re, im)
    assert allclose(mehler_transform(f, z), mehler_via_smoothing(f, z), rtol=1e-9)


@pytest.mark.parametrize("z", [0.5, -0.8, 0.3 + 0.4j, 1j, 0.9j])
def test_kernel_integral_agrees(z):
    rng = np.random.default_rng(4)
    f = random_poly(rng, 1, 4)
    x = rng.standard_normal((5, 1))
    np.testing.assert_allclose(mehler_kernel_apply(f, z, x), evaluate_many(mehler_transform(f, z), x),
                               rtol=1e-9, atol=1e-9)


def test_kernel_examples():
    one = HermitePoly.constant(1)
    assert mehler_kernel_apply(one, 0.3 + 0.2j, [[0.7]])[0] == pytest.approx(1)
    assert mehler_kernel_apply(hermite_basis((1,)), 0.5, [[2.0]])[0] == pytest.approx(1.0)
    assert mehler_kernel_apply(hermite_basis((2,)), 1j, [[0.0]])[0] == pytest.approx(1.0)


def test_noise_endpoints():
    f = ExpLinear((0.4, -0.2), 1.3)
    g = noise_operator(f, 1.0)
    x = np.random.default_rng(0).standard_normal((4, 2))
    np.testing.assert_allclose(g(x), f(x))
    with pytest.raises(ValueError):
        noise_operator(f, 1.5)


def test_noise_of_halfline():
    theta, r = 0.4, 0.6
    g = noise_operator(HalfspaceIndicator(theta), r)
    x = np.linspace(-2, 2, 7)
    np.testing.assert_allclose(g(x[:, None]), ndtr((theta - r * x) / math.sqrt(1 - r * r)), atol=1e-14)


def test_noise_of_exponential_at_origin():
    a, r = 0.8, 0.35
    g = noise_operator(ExpLinear((a,)), r)
    assert g([[0.0]])[0] == pytest.approx(math.exp(a * a * (1 - r * r) / 2))


@pytest.mark.parametrize("make", [
    lambda rng: Polynomial(random_poly(rng, 1, 4, complex_coeffs=False)),
    lambda rng: ShiftedPositive(random_poly(rng, 1, 2), 0.5),
    lambda rng: ExpLinear((rng.normal(),), 1.0),
    lambda rng: IntervalUnion(((-1.0, -0.2), (0.5, 1.7))),
])
def test_noise_operator_matches_quadrature(make):
    rng = np.random.default_rng(8)
    f = make(rng)
    r = 0.45
    g = noise_operator(f, r)
    s = math.sqrt(1 - r * r)
    for xi in rng.standard_normal(4):
        def integrand(e):
            return float(np.real(f([[r * xi + s * e]])[0])) * math.exp(-e * e / 2) / math.sqrt(2 * math.pi)
        kinks = [(a - r * xi) / s for iv in getattr(f, "intervals", ()) for a in iv]
        direct = quad(integrand, -12, 12, points=kinks or None, limit=200, epsabs=1e-12)[0]
        assert np.real(g([[xi]])[0]) == pytest.approx(direct, rel=1e-8, abs=1e-10)


def test_fourier_ratio_of_gaussian_is_one():
    x = np.linspace(-1, 1, 5)[:, None]
    for t in (1.5, 2.0, 4.0):
        np.testing.assert_allclose(fourier_ratio(HermitePoly.constant(1), t, x), 1.0, atol=1e-10)


def test_fourier_ratio_matches_imaginary_transform():
    t = 2.0
    got = fourier_ratio(hermite_basis((1,)), t, [[1.0]])[0]
    want = evaluate_many(mehler_transform(hermite_basis((1,)), 1j), [[1.0]])[0]
    assert abs(got - want) <= 1e-8


def test_fourier_ratio_at_origin_is_weighted_mean():
    rng = np.random.default_rng(9)
    h = random_poly(rng, 1, 4)
    t = 3.0
    # at omega = 0 the ratio is int h e_t / int e_t = E h(sqrt(t) Z)
    eta, w = np.polynomial.hermite_e.hermegauss(20)
    direct = np.dot(w / w.sum(), evaluate_many(h, math.sqrt(t) * eta[:, None]))
    assert abs(fourier_ratio(h, t, [[0.0]])[0] - direct) <= 1e-8


def test_exp_linear_moments_close_form():
    cov = BlockCovariance.identity((1,))
    f = ExpLinear((0.7,), 2.0)
    got = expect_quadrature(lambda x: f(x), cov, 40)
    assert got == pytest.approx(2.0 * math.exp(0.49 / 2), rel=1e-12)
