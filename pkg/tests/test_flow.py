import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import ndtr

from hypergauss.flow import (FlowDomainError, FlowSpec, certify_monotone, complex_flow_value,
                             gaussian_average, real_flow_value)
from hypergauss.gaussian import BlockCovariance
from hypergauss.hermite import HermitePoly, random_poly
from hypergauss.local import HyperParams, check_real_local
from hypergauss.mehler import (ExpLinear, HalfspaceIndicator, IntervalUnion, Polynomial, ShiftedPositive)
from hypergauss.pairs import FunctionPair, InnerFunction, OuterFunction

SHORT = (0.0, 0.25, 0.5, 0.75, 1.0)


def power_pair(alpha, p):
    return FunctionPair(OuterFunction.power(alpha), InnerFunction.product_of_powers(p))


@pytest.mark.parametrize("f", [
    ExpLinear((0.7,), 1.5),
    Polynomial(HermitePoly.from_dict(1, {(3,): 1.0, (1,): -0.5, (0,): 2.0}, "monomial")),
    HalfspaceIndicator(0.3),
    IntervalUnion(((-1.0, -0.2), (0.4, 1.5))),
])
def test_gaussian_average_matches_quadrature(f):
    means = np.array([[-0.8], [0.0], [1.3]])
    sigma = 0.6
    got = gaussian_average(f, means, sigma)
    if isinstance(f, (HalfspaceIndicator, IntervalUnion)):
        kinks = [v for iv in f.intervals for v in iv] if isinstance(f, IntervalUnion) else [f.threshold]
        for m, g in zip(means[:, 0], got):
            pts = [(k - m) / sigma for k in kinks]
            direct = quad(lambda e: float(np.real(f([[m + sigma * e]])[0])) * math.exp(-e * e / 2),
                          -12, 12, points=pts, limit=200)[0] / math.sqrt(2 * math.pi)
            assert g == pytest.approx(direct, abs=1e-10)
    else:
        eta, w = np.polynomial.hermite_e.hermegauss(40)
        w = w / w.sum()
        direct = [np.dot(w, np.real(f((m + sigma * eta)[:, None]))) for m in means[:, 0]]
        np.testing.assert_allclose(got, direct, rtol=1e-12)


def test_constant_inputs_give_a_flat_profile():
    cov = BlockCovariance.equicorrelated(2, 0.4)
    spec = FlowSpec("real", power_pair(1.5, (1.0, 2.0)), cov, (ExpLinear((0.0,), 2.0), ExpLinear((0.0,), 0.5)),
                    r=(0.3, 0.6), s_grid=SHORT)
    vals = [real_flow_value(spec, s) for s in SHORT]
    np.testing.assert_allclose(vals, (2.0 * 0.25) ** 1.5, rtol=1e-12)


def test_linear_inner_function_gives_a_flat_profile():
    B = InnerFunction.user(2, lambda c: c[0] + 2 * c[1], lambda c: np.array([1.0, 2.0]),
                           lambda c: np.zeros((2, 2)))
    cov = BlockCovariance.equicorrelated(2, -0.3)
    fs = (HalfspaceIndicator(0.2), IntervalUnion(((-0.5, 1.0),)))
    spec = FlowSpec("real", FunctionPair(OuterFunction("identity"), B), cov, fs, r=(0.5, 0.2), s_grid=SHORT)
    rep = certify_monotone(spec)
    exact = ndtr(0.2) + 2 * (ndtr(1.0) - ndtr(-0.5))
    np.testing.assert_allclose(rep.values[:-1], exact, atol=1e-8)
    # at s = 1 nothing smooths the indicators, so the tensor rule is only
    # as good as its reported refinement error
    assert abs(rep.values[-1] - exact) <= 3 * rep.errors[-1]


@pytest.mark.parametrize("grid", [(0, 0.5, 1), (0, 0.5, 0.4, 0.8, 1), (0, 0.2, 0.4, 0.8, 1.2)])
def test_bad_grids_are_rejected(grid):
    cov = BlockCovariance.identity((1,))
    with pytest.raises(ValueError):
        FlowSpec("real", power_pair(2, (1.0,)), cov, (ExpLinear((0.1,)),), r=(0.5,), s_grid=grid)


def test_domain_violations_are_rejected():
    cov = BlockCovariance.identity((1,))
    sign_changing = Polynomial(HermitePoly.from_dict(1, {(1,): 1.0}, "monomial"))
    with pytest.raises(FlowDomainError):
        FlowSpec("real", power_pair(2, (1.0,)), cov, (sign_changing,), r=(0.5,))
    with pytest.raises(ValueError):
        FlowSpec("complex", power_pair(2, (1.0,)), cov, (HermitePoly.constant(1),), z=(1.2,))
    with pytest.raises(ValueError):
        FlowSpec("complex", FunctionPair(OuterFunction("identity"), InnerFunction.borell(0.3)),
                 BlockCovariance.identity((1, 1)), (HermitePoly.constant(1),) * 2, z=(0.5, 0.5))


def test_default_direction_follows_outer_power():
    cov = BlockCovariance.identity((1,))
    fs = (ExpLinear((0.1,)),)
    assert FlowSpec("real", power_pair(0.5, (1.0,)), cov, fs, r=(0.5,)).direction == "reverse"
    assert FlowSpec("real", power_pair(2.0, (1.0,)), cov, fs, r=(0.5,)).direction == "forward"


@pytest.mark.parametrize("direction, alpha", [("forward", 2.0), ("reverse", 0.5)])
def test_admissible_real_profile_is_monotone_with_matching_endpoints(direction, alpha):
    cov = BlockCovariance.equicorrelated(2, 0.3)
    p, r = ((3.0, 3.0), (0.3, 0.3)) if direction == "forward" else ((0.5, 0.6), (0.5, 0.4))
    assert check_real_local(HyperParams(p, alpha, r=r), cov, direction).holds
    rng = np.random.default_rng(3)
    fs = (ShiftedPositive(random_poly(rng, 1, 1, complex_coeffs=False), 0.3), ExpLinear((0.4,), 1.1))
    rep = certify_monotone(FlowSpec("real", power_pair(alpha, p), cov, fs, r=r, s_grid=SHORT))
    assert rep.monotone and rep.endpoint_check["consistent"]


def test_complex_profile_at_the_beckner_point():
    p = 1.5
    cov = BlockCovariance.identity((1,))
    f = random_poly(np.random.default_rng(2), 1, 2)
    spec = FlowSpec("complex", power_pair(p / (p - 1) / p, (p,)), cov, (f,), z=(1j * math.sqrt(p - 1),),
                    s_grid=SHORT)
    rep = certify_monotone(spec)
    assert rep.holds
    check = rep.endpoint_check
    assert abs(complex_flow_value(spec, 1.0) - check["global_rhs"]) <= check["tolerance"]
