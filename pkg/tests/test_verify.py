import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from hypergauss.gaussian import BlockCovariance, expect_quadrature
from hypergauss.hermite import HermitePoly, hermite_basis, random_poly
from hypergauss.local import (HyperParams, check_complex_local, check_gaussian_jensen, check_real_local,
                              min_eigenpair)
from hypergauss.mehler import ExpLinear, GaussPoly, Polynomial, ShiftedPositive, noise_operator
from hypergauss.pairs import InnerFunction
from hypergauss.verify import (Budget, SharpConstants, gaussian_abs_moment, log_sobolev_terms,
                               perturbation_witness, real_hc_log_ratio, verify_chaos_moments,
                               verify_complex_hc, verify_hausdorff_young, verify_log_sobolev,
                               verify_noisy_jensen, verify_pq_hausdorff_young, verify_real_hc,
                               verify_rho_hy)

seeds = st.integers(0, 2**32 - 1)
QUAD = Budget(method="quadrature")


def monomial_linear(w, eps, const=1.0):
    k = len(w)
    coeffs = {(0,) * k: const}
    for i, v in enumerate(w):
        e = [0] * k
        e[i] = 1
        coeffs[tuple(e)] = eps * v
    return HermitePoly.from_dict(k, coeffs, "monomial")


# ---------------------------------------------------------------- constants

@pytest.mark.parametrize("p", [1.2, 1.5, 1.9])
def test_beckner_babenko_is_the_gaussian_ratio(p):
    # unitary transform of exp(-x^2/2) is itself; compute both norms by quadrature
    q = p / (p - 1)
    g = lambda x: math.exp(-x * x / 2)  # noqa: E731
    g_hat = lambda w: quad(lambda x: g(x) * math.cos(w * x), -40, 40)[0] / math.sqrt(2 * math.pi)  # noqa: E731
    num = quad(lambda w: abs(g_hat(w)) ** q, -30, 30, limit=200)[0] ** (1 / q)
    den = quad(lambda x: g(x) ** p, -40, 40)[0] ** (1 / p)
    assert SharpConstants.beckner_babenko(p, q, 1) == pytest.approx(num / den, rel=1e-9)


def test_beckner_babenko_example():
    assert SharpConstants.beckner_babenko(1.5, 3.0, 1) == pytest.approx(0.7016926042943222, rel=1e-14)
    assert SharpConstants.beckner_babenko(1.5, 3.0, 3) == pytest.approx(0.7016926042943222**3, rel=1e-14)


@pytest.mark.parametrize("p, n", [(1.5, 1), (1.25, 2), (1.8, 3)])
def test_rho_constant_without_correlation_is_the_doubled_dimension_constant(p, n):
    q = p / (p - 1)
    assert SharpConstants.rho_hy(p, q, 0.0, n) == pytest.approx(SharpConstants.beckner_babenko(p, q, 2 * n))


def test_constant_domains():
    assert SharpConstants.chaos_complex(2, 4, 0.5, 1.5, 2) == math.inf
    assert SharpConstants.chaos_real(2, 4, 0.5, 2) == math.inf
    assert SharpConstants.log_sobolev(2, 0.5) == math.inf
    assert SharpConstants.chaos_real(3, 5, 1.0, 2) == pytest.approx(2.0)
    assert SharpConstants.pq_hy(2.0, 0.8, 3) == pytest.approx(1.6**1.5)
    with pytest.raises(ValueError):
        SharpConstants.rho_hy(1.5, 3, 1.0, 1)


# ---------------------------------------------------------------- complex and real

def test_constants_are_equality_cases():
    cov = BlockCovariance.equicorrelated(2, 0.3)
    fs = [HermitePoly.constant(1, 2.0), HermitePoly.constant(1, 0.5)]
    comp = verify_complex_hc(fs, HyperParams((1.5, 2.0), 1.7, z=(0.3j, 0.5)), cov)
    assert comp.margin == pytest.approx(0, abs=1e-12) and comp.holds


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_admissible_complex_parameters_hold(seed):
    rng = np.random.default_rng(seed)
    cov = BlockCovariance.identity((1,))
    p = float(rng.uniform(1.1, 3))
    z = complex(*rng.uniform(-1, 1, 2)) * 0.3
    params = HyperParams((p,), 1.0, z=(z,))
    if check_complex_local(params, cov).margin > 1e-6:
        f = random_poly(rng, 1, 2)
        assert verify_complex_hc([f], params, cov).holds


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_exponential_closed_form_matches_local_quadratic_form(seed):
    rng = np.random.default_rng(seed)
    cov = BlockCovariance.random(rng, (1, 2), mixing=0.5)
    params = HyperParams(tuple(rng.uniform(0.5, 3, 2)), float(rng.uniform(1, 2.5)), r=tuple(rng.uniform(-1, 1, 2)))
    fs = [ExpLinear(rng.normal(size=1), 1.3), ExpLinear(rng.normal(size=2), 0.8)]
    comp = verify_real_hc(fs, params, cov)
    assert comp.details["log_ratio"] == pytest.approx(real_hc_log_ratio(fs, params, cov), rel=1e-10, abs=1e-12)


def test_exponential_closed_form_matches_quadrature():
    cov = BlockCovariance.equicorrelated(2, 0.4)
    params = HyperParams((1.5, 2.5), 1.6, r=(0.5, -0.3))
    fs = [ExpLinear((0.4,), 1.2), ExpLinear((-0.3,), 0.7)]
    comp = verify_real_hc(fs, params, cov)
    tf = [noise_operator(f, r) for f, r in zip(fs, params.r)]
    a = params.alpha
    lhs = expect_quadrature(lambda x: tf[0](x[:, :1]) ** (a * 1.5) * tf[1](x[:, 1:]) ** (a * 2.5), cov, 40) ** (1 / a)
    rhs = expect_quadrature(lambda x: fs[0](x[:, :1]) ** 1.5 * fs[1](x[:, 1:]) ** 2.5, cov, 40)
    assert comp.lhs == pytest.approx(lhs, rel=1e-11) and comp.rhs == pytest.approx(rhs, rel=1e-11)


def test_no_noise_means_equality():
    cov = BlockCovariance.identity((1,))
    f = ShiftedPositive(random_poly(np.random.default_rng(3), 1, 2, complex_coeffs=False), 0.4)
    comp = verify_real_hc([f], HyperParams((2.0,), 1.0, r=(1.0,)), cov)
    assert comp.margin == pytest.approx(0, abs=1e-10)


def test_real_guards():
    cov = BlockCovariance.identity((1,))
    with pytest.raises(ValueError):
        verify_real_hc([ExpLinear((0.1,))], HyperParams((2.0,), 0.5, r=(0.3,)), cov, "forward")
    with pytest.raises(ValueError):
        verify_real_hc([Polynomial(hermite_basis((1,)))], HyperParams((-1.0,), 2.0, r=(0.3,)), cov)


# ---------------------------------------------------------------- noisy Jensen

@pytest.mark.parametrize("rho", [0.5, -0.5])
def test_noisy_jensen_product_margin_closed_form(rho):
    cov = BlockCovariance.equicorrelated(2, rho)
    B = InnerFunction.quadratic([[0.0, 1.0], [1.0, 0.0]])
    eps, w = 0.3, (1.0, -2.0)
    fs = [Polynomial(monomial_linear((w[0],), eps, 1.5)), Polynomial(monomial_linear((w[1],), eps, 0.5))]
    comp = verify_noisy_jensen(B, fs, (0.0, 0.0), cov, QUAD)
    assert comp.margin == pytest.approx(rho * eps**2 * w[0] * w[1], abs=1e-12)


def test_noisy_jensen_convex_quadratic_holds():
    rng = np.random.default_rng(1)
    cov = BlockCovariance.random(rng, (1, 1))
    B = InnerFunction.quadratic(np.eye(2))
    fs = [Polynomial(random_poly(rng, 1, 2, complex_coeffs=False)) for _ in range(2)]
    assert check_gaussian_jensen(B, (0.5, -0.2), cov, c_grid=np.zeros((1, 2))).holds
    assert verify_noisy_jensen(B, fs, (0.5, -0.2), cov, QUAD).holds


# ---------------------------------------------------------------- Fourier forms

def test_fourier_form_is_the_imaginary_transform_check():
    rng = np.random.default_rng(5)
    cov = BlockCovariance.equicorrelated(2, 0.2)
    ts = (1.6, 2.2)
    hs = [random_poly(rng, 1, 2) for _ in ts]
    hy = verify_hausdorff_young([GaussPoly(h, t) for h, t in zip(hs, ts)], (1.5, 1.8), 1.4, cov)
    ch = verify_complex_hc(hs, HyperParams((1.5, 1.8), 1.4, z=tuple(1j * math.sqrt(t - 1) for t in ts)), cov)
    assert hy.lhs == pytest.approx(ch.lhs, rel=1e-13) and hy.rhs == pytest.approx(ch.rhs, rel=1e-13)
    assert hy.details["fourier_check"] <= 1e-8


@pytest.mark.parametrize("rho", [0.0, 0.3, -0.4])
def test_pq_form_is_tight_on_gaussians(rho):
    cov = BlockCovariance.equicorrelated(2, rho)
    p = 1.0 / cov.lam_min + 0.4
    t = p * cov.lam_min
    q = 1 / (cov.lam_max * (1 - 1 / t))
    gs = [GaussPoly(HermitePoly.constant(1), t) for _ in range(2)]
    comp = verify_pq_hausdorff_young(gs, p, q, cov)
    assert comp.details["ratio"] == pytest.approx(1.0, abs=1e-9) and comp.holds


def test_rho_form_on_gaussians():
    p, q = 1.5, 3.0
    g = GaussPoly(HermitePoly.constant(1), p)
    comp = verify_rho_hy(g, g, 0.0, p, q)
    assert comp.details["ratio"] == pytest.approx(1.0, abs=1e-9)


# ---------------------------------------------------------------- log-Sobolev

@pytest.mark.parametrize("eps", [0.05, 0.5, 1.0])
def test_log_sobolev_equality_along_bottom_eigenvector(eps):
    cov = BlockCovariance.equicorrelated(2, 0.4)
    p = 2.0
    _, v = min_eigenpair(cov.matrix)
    fs = [ExpLinear((eps * v[0],)), ExpLinear((eps * v[1],))]
    comp = verify_log_sobolev(fs, p, cov)
    assert comp.margin == pytest.approx(0, abs=1e-12 * (1 + comp.lhs))
    assert comp.holds
    assert not verify_log_sobolev(fs, p, cov, form="sqrt").holds


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_log_sobolev_holds_for_positive_polynomials(seed):
    rng = np.random.default_rng(seed)
    cov = BlockCovariance.equicorrelated(2, float(rng.uniform(-0.5, 0.5)))
    p = 1 / cov.lam_min + float(rng.uniform(0.1, 2))
    fs = [ShiftedPositive(random_poly(rng, 1, 2, complex_coeffs=False), 0.5) for _ in range(2)]
    assert verify_log_sobolev(fs, p, cov, budget=Budget(nodes=40)).holds


def test_log_sobolev_terms_of_independent_blocks_add():
    # with identity covariance the entropy of a product of independent factors with unit mean is additive
    cov = BlockCovariance.identity((1, 1))
    a, b = 0.6, -0.9
    p = 1.5
    both = log_sobolev_terms([ExpLinear((a,)), ExpLinear((b,))], p, cov)
    one = log_sobolev_terms([ExpLinear((a,))], p, BlockCovariance.identity((1,)))
    two = log_sobolev_terms([ExpLinear((b,))], p, BlockCovariance.identity((1,)))
    m1, m2 = math.exp(p * p * a * a / 2), math.exp(p * p * b * b / 2)
    assert both[0] == pytest.approx(one[0] * m2 + two[0] * m1, rel=1e-12)
    assert both[1] == pytest.approx(one[1] * m2 + two[1] * m1, rel=1e-12)


# ---------------------------------------------------------------- chaos

def test_gaussian_absolute_moments():
    assert gaussian_abs_moment(2) == pytest.approx(1)
    assert gaussian_abs_moment(4) == pytest.approx(3)
    assert gaussian_abs_moment(1) == pytest.approx(math.sqrt(2 / math.pi))


def test_first_chaos_norm_is_gaussian_moment():
    cov = BlockCovariance.identity((1,))
    comp = verify_chaos_moments([hermite_basis((1,))], 2.5, 4.5, cov, "real")
    assert comp.lhs == pytest.approx(gaussian_abs_moment(4.5) ** (1 / 4.5), rel=1e-10)
    assert comp.details["ratio"] == pytest.approx(
        gaussian_abs_moment(4.5) ** (1 / 4.5) / gaussian_abs_moment(2.5) ** (1 / 2.5), rel=1e-10)
    assert comp.holds


def test_equal_exponents_give_unit_ratio():
    cov = BlockCovariance.equicorrelated(2, 0.3)
    fs = [hermite_basis((2,)), hermite_basis((1,))]
    comp = verify_chaos_moments(fs, 3.0, 3.0, cov)
    assert comp.details["ratio"] == pytest.approx(1.0, abs=1e-12) and comp.holds


def test_degenerate_bound_is_flagged():
    cov = BlockCovariance.equicorrelated(2, 0.5)
    comp = verify_chaos_moments([hermite_basis((1,)), hermite_basis((1,))], 2.0, 4.0, cov)
    assert comp.details["degenerate"] and comp.holds and comp.rhs == math.inf


def test_mixed_degrees_are_rejected():
    with pytest.raises(ValueError):
        verify_chaos_moments([hermite_basis((1,)) + hermite_basis((2,))], 2, 3, BlockCovariance.identity((1,)))


# ---------------------------------------------------------------- witnesses

def test_complex_witness_is_certified():
    p = 1.5
    q = p / (p - 1)
    params = HyperParams((p,), q / p, z=(1.2j * math.sqrt(p - 1),))
    cov = BlockCovariance.identity((1,))
    rep = check_complex_local(params, cov)
    assert not rep.holds
    fit = perturbation_witness("complex", params, cov, rep)
    assert fit.certified and fit.verdict == "violated" and fit.rel_error <= 0.2


def test_real_witness_is_certified():
    p, q = 2.0, 4.0
    r = 1.2 * math.sqrt((p - 1) / (q - 1))
    params = HyperParams((p, p), q / p, r=(r, r))
    cov = BlockCovariance.equicorrelated(2, 0.2)
    rep = check_real_local(params, cov)
    fit = perturbation_witness("real", params, cov, rep)
    assert fit.certified and fit.coefficient < 0


def test_jensen_witness_is_certified():
    cov = BlockCovariance.equicorrelated(2, 0.5)
    B = InnerFunction.quadratic([[0.0, 1.0], [1.0, 0.0]])
    rep = check_gaussian_jensen(B, (0.0, 0.0), cov, c_grid=np.zeros((1, 2)))
    fit = perturbation_witness("ngj", HyperParams((1.0, 1.0), r=(0.0, 0.0)), cov, rep, B=B)
    assert fit.certified
    assert fit.coefficient == pytest.approx(fit.predicted, rel=1e-6)
