import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypergauss.borell import (borell_M, borell_M_derivatives, bvn_cdf, bvn_cdf_adaptive,
                               interval_probability, monge_ampere_residual, noisy_correlation,
                               verify_noisy_borell)
from hypergauss.mehler import IntervalUnion

GRID = np.linspace(0.05, 0.95, 9)


@settings(max_examples=60, deadline=None)
@given(st.floats(-4, 4), st.floats(-4, 4), st.floats(-0.99, 0.99))
def test_owen_route_matches_adaptive_integral(h, k, rho):
    assert bvn_cdf(h, k, rho) == pytest.approx(bvn_cdf_adaptive(h, k, rho), abs=1e-12)


def test_cdf_at_origin():
    for rho in (-0.5, 0.0, 0.7):
        assert bvn_cdf(0.0, 0.0, rho) == pytest.approx(0.25 + math.asin(rho) / (2 * math.pi), abs=1e-15)


@pytest.mark.parametrize("s, ref", [
    (0.0, lambda u, v: u * v),
    (1.0, np.minimum),
    (-1.0, lambda u, v: np.maximum(u + v - 1, 0)),
])
def test_copula_endpoints(s, ref):
    u, v = np.meshgrid(GRID, GRID)
    np.testing.assert_allclose(borell_M(u, v, s), ref(u, v), atol=1e-9)


@pytest.mark.parametrize("s", [-0.75, -0.5, -0.25, 0.25, 0.5, 0.75])
def test_monge_ampere_identity(s):
    u, v = np.meshgrid(GRID, GRID)
    assert np.max(np.abs(monge_ampere_residual(u, v, s))) <= 1e-7


@pytest.mark.parametrize("s", [-0.6, 0.3, 0.8])
def test_derivatives_match_finite_differences(s):
    h = 1e-5
    for u, v in [(0.3, 0.6), (0.8, 0.2), (0.5, 0.5)]:
        d = borell_M_derivatives(u, v, s)
        mu = (borell_M(u + h, v, s) - borell_M(u - h, v, s)) / (2 * h)
        muu = (borell_M_derivatives(u + h, v, s)["M_u"] - borell_M_derivatives(u - h, v, s)["M_u"]) / (2 * h)
        muv = (borell_M_derivatives(u, v + h, s)["M_u"] - borell_M_derivatives(u, v - h, s)["M_u"]) / (2 * h)
        assert d["M_u"] == pytest.approx(mu, abs=1e-7)
        assert d["M_uu"] == pytest.approx(muu, abs=1e-5)
        assert d["M_uv"] == pytest.approx(muv, abs=1e-5)


def test_adaptive_method_agrees():
    assert borell_M(0.3, 0.7, 0.4, method="adaptive") == pytest.approx(borell_M(0.3, 0.7, 0.4), abs=1e-12)


def test_half_lines_give_equality():
    a = IntervalUnion(((-np.inf, 0.3),))
    b = IntervalUnion(((-np.inf, -0.5),))
    comp = verify_noisy_borell(a, b, 0.4, -0.3, 0.6)
    assert abs(comp.margin) <= 1e-6


def test_no_noise_reduces_to_plain_stability():
    a = IntervalUnion(((-0.5, 1.0),))
    b = IntervalUnion(((0.0, 2.0),))
    s = 0.5
    comp = verify_noisy_borell(a, b, 0.0, 0.0, s)
    assert comp.lhs == pytest.approx(interval_probability(a, b, s))
    ua, ub = interval_probability(a, IntervalUnion(((-40, 40),)), 0), interval_probability(b, IntervalUnion(((-40, 40),)), 0)
    assert comp.rhs == pytest.approx(float(borell_M(ua, ub, s)), abs=1e-9)
    assert comp.holds


def test_whole_line_gives_one():
    r = IntervalUnion(((-40.0, 40.0),))
    comp = verify_noisy_borell(r, r, 0.3, 0.2, 0.5)
    assert comp.lhs == pytest.approx(1) and comp.rhs == pytest.approx(1)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_direction_follows_sign_of_s(seed):
    rng = np.random.default_rng(seed)
    sets = []
    for _ in range(2):
        cuts = np.sort(rng.uniform(-2.5, 2.5, 2 * int(rng.integers(1, 4))))
        if np.any(np.diff(cuts) <= 1e-9):
            return
        sets.append(IntervalUnion(tuple(zip(cuts[::2], cuts[1::2]))))
    r1, r2 = rng.uniform(-0.8, 0.8, 2)
    for s in (0.6, -0.6):
        comp = verify_noisy_borell(sets[0], sets[1], r1, r2, s)
        assert comp.holds, (s, comp)


def test_noisy_correlation_formula():
    assert noisy_correlation(0.0, 0.0, 0.4) == pytest.approx(0.4)
    assert noisy_correlation(0.4, -0.3, 0.6) == pytest.approx(0.6 * math.sqrt(0.84 * 0.91) / 1.12)
