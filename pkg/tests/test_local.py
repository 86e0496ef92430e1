import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypergauss.gaussian import BlockCovariance
from hypergauss.local import (HyperParams, check_complex_local, check_correlated_r_bound,
                              check_fb_complex_local, check_fb_real_local, check_gaussian_jensen,
                              check_imaginary_sandwich, check_real_local, complex_local_matrix,
                              correlated_r_bound, min_eigenpair)
from hypergauss.pairs import FunctionPair, InnerFunction, OuterFunction

seeds = st.integers(0, 2**32 - 1)


def power_pair(alpha, p):
    return FunctionPair(OuterFunction.power(alpha), InnerFunction.product_of_powers(p))


def test_identity_point_has_zero_margin():
    rep = check_complex_local(HyperParams((1.0,), 1.0, z=(0,)), BlockCovariance.identity((1,)))
    assert rep.holds and rep.margin == pytest.approx(0, abs=1e-14)


@pytest.mark.parametrize("p", [1.2, 1.5, 1.8])
def test_beckner_point_is_on_the_boundary(p):
    q = p / (p - 1)
    params = HyperParams((p,), q / p, z=(1j * math.sqrt(p - 1),))
    rep = check_complex_local(params, BlockCovariance.identity((1,)))
    assert rep.margin == pytest.approx(0, abs=1e-12)
    slower = HyperParams((p,), q / p, z=(1j * math.sqrt(p - 1) * 1.05,))
    assert not check_complex_local(slower, BlockCovariance.identity((1,))).holds


@pytest.mark.parametrize("p, q", [(1.5, 3.0), (2.0, 4.0), (3.0, 7.0)])
def test_bonami_nelson_point_is_on_the_boundary(p, q):
    r = math.sqrt((p - 1) / (q - 1))
    cov = BlockCovariance.identity((1,))
    assert check_real_local(HyperParams((p,), q / p, r=(r,)), cov).margin == pytest.approx(0, abs=1e-14)
    assert not check_real_local(HyperParams((p,), q / p, r=(1.01 * r,)), cov).holds


def test_correlated_bound_example():
    assert correlated_r_bound(4, 8, 0.5) == pytest.approx(math.sqrt(1 / 3), abs=1e-15)
    with pytest.raises(ValueError):
        correlated_r_bound(1.5, 3, 0.5)


@pytest.mark.parametrize("rho, p, q", [(0.3, 2.0, 4.0), (0.5, 3.0, 5.0), (-0.4, 2.5, 3.0)])
def test_correlated_bound_is_sharp_for_the_local_matrix(rho, p, q):
    cov = BlockCovariance.equicorrelated(2, rho)
    r = correlated_r_bound(p, q, cov.lam_min)
    assert check_correlated_r_bound(p, q, cov, r).margin == pytest.approx(0, abs=1e-15)
    rep = check_real_local(HyperParams((p, p), q / p, r=(r, r)), cov)
    assert rep.margin == pytest.approx(0, abs=1e-12)
    zrep = check_complex_local(HyperParams((p, p), q / p, z=(r, r)), cov)
    assert zrep.margin == pytest.approx(0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_sandwich_agrees_with_complex_matrix(seed):
    rng = np.random.default_rng(seed)
    cov = BlockCovariance.random(rng, (1, 2), mixing=float(rng.uniform(0, 0.8)))
    s = tuple(rng.uniform(-1, 1, 2))
    params = HyperParams(tuple(rng.uniform(1, 4, 2)), float(rng.uniform(1, 2.5)),
                         z=tuple(1j * v for v in s), s=s)
    a, b = check_imaginary_sandwich(params, cov), check_complex_local(params, cov)
    if min(abs(a.margin), abs(b.margin)) > 1e-9:
        assert a.holds == b.holds


def test_complex_matrix_is_symmetric_and_witness_is_eigenvector():
    rng = np.random.default_rng(2)
    cov = BlockCovariance.random(rng, (2, 1))
    params = HyperParams((1.5, 2.5), 1.3, z=(0.3 + 0.4j, -0.2j))
    mat = complex_local_matrix(params, cov)
    np.testing.assert_allclose(mat, mat.T, atol=1e-15)
    lam, vec = min_eigenpair(mat)
    np.testing.assert_allclose(mat @ vec, lam * vec, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_general_pair_checkers_match_specialized(seed):
    rng = np.random.default_rng(seed)
    cov = BlockCovariance.random(rng, (1, 1), mixing=0.6)
    p = tuple(rng.uniform(1, 4, 2))
    alpha = float(rng.uniform(1, 2.5))
    z = tuple(rng.uniform(-1, 1, 2) + 1j * rng.uniform(-1, 1, 2))
    spec = check_complex_local(HyperParams(p, alpha, z=z), cov)
    fb = check_fb_complex_local(power_pair(alpha, p), z, cov)
    assert fb.margin == pytest.approx(spec.margin, abs=1e-10)
    r = tuple(rng.uniform(-1, 1, 2))
    for direction, a in (("forward", alpha), ("reverse", float(rng.uniform(0.2, 1)))):
        spec = check_real_local(HyperParams(p, a, r=r), cov, direction)
        fb = check_fb_real_local(power_pair(a, p), r, cov, direction=direction)
        assert fb.margin == pytest.approx(spec.margin, abs=1e-10)


def test_small_outer_power_fails_convexity_for_complex_pairs():
    cov = BlockCovariance.identity((1, 1))
    rep = check_fb_complex_local(power_pair(0.5, (2.0, 2.0)), (0.1, 0.1), cov)
    assert rep.convexity_ok is False and not rep.holds


def test_direction_guard():
    cov = BlockCovariance.identity((1,))
    with pytest.raises(ValueError):
        check_real_local(HyperParams((2.0,), 0.5, r=(0.3,)), cov, "forward")
    with pytest.raises(ValueError):
        check_real_local(HyperParams((2.0,), 1.5, r=(0.3,)), cov, "reverse")


@pytest.mark.parametrize("rho", [0.3, -0.5, 0.8])
def test_product_inner_function_fails_jensen_by_correlation(rho):
    cov = BlockCovariance.equicorrelated(2, rho)
    B = InnerFunction.quadratic([[0.0, 1.0], [1.0, 0.0]])
    rep = check_gaussian_jensen(B, (0.0, 0.0), cov, c_grid=np.zeros((1, 2)))
    assert rep.margin == pytest.approx(-abs(rho), abs=1e-14)
    assert not rep.holds


def test_jensen_with_full_noise_holds():
    cov = BlockCovariance.equicorrelated(2, 0.5)
    B = InnerFunction.quadratic([[0.0, 1.0], [1.0, 0.0]])
    assert check_gaussian_jensen(B, (1.0, 1.0), cov, c_grid=np.zeros((1, 2))).holds


@pytest.mark.parametrize("s", [0.3, 0.7])
def test_stability_copula_sits_on_the_reverse_boundary(s):
    cov = BlockCovariance.equicorrelated(2, s)
    pair = FunctionPair(OuterFunction("identity"), InnerFunction.borell(s))
    rep = check_fb_real_local(pair, (0.0, 0.0), cov, direction="reverse")
    assert rep.holds
    assert rep.extra["raw_form_margin"] == pytest.approx(0, abs=1e-7)


def test_stability_copula_with_noise_holds_reverse():
    s, r = 0.5, (0.4, -0.3)
    rho = s * math.sqrt((1 - r[0] ** 2) * (1 - r[1] ** 2)) / (1 - r[0] * r[1])
    cov = BlockCovariance.equicorrelated(2, rho)
    pair = FunctionPair(OuterFunction("identity"), InnerFunction.borell(s))
    assert check_fb_real_local(pair, r, cov, direction="reverse").holds
