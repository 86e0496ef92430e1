"""The bivariate Gaussian copula ``M(u, v; s) = Phi_2(Phi^-1 u, Phi^-1 v; s)``
and its derivatives, plus the noisy two-set inequality it governs."""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr, ndtri, owens_t

from .gaussian import BlockCovariance, expect_quadrature
from .mehler import IntervalUnion, noise_operator
from .results import Comparison

_CLIP = 38.0


def _phi(x):
    return np.exp(-np.square(x) / 2) / math.sqrt(2 * math.pi)


_SNAP = 1e-150


def bvn_cdf(h, k, rho):
    """``P(X <= h, Y <= k)`` for standard normals with correlation ``rho``.

    Vectorized through Owen's T function; infinite arguments are clipped far
    into the tails where ``Phi`` is exactly 0 or 1 in double precision.
    """
    h = np.clip(np.asarray(h, dtype=float), -_CLIP, _CLIP)
    k = np.clip(np.asarray(k, dtype=float), -_CLIP, _CLIP)
    h, k = np.broadcast_arrays(h, k)
    if rho >= 1.0:
        return ndtr(np.minimum(h, k))
    if rho <= -1.0:
        return np.maximum(ndtr(h) + ndtr(k) - 1.0, 0.0)
    sq = math.sqrt(1 - rho * rho)
    # arguments this small change the probability by far less than an ulp;
    # snapping them to zero keeps the Owen parameters finite
    h = np.where(np.abs(h) < _SNAP, 0.0, h)
    k = np.where(np.abs(k) < _SNAP, 0.0, k)
    hh = np.where(h == 0, 1.0, h)
    kk = np.where(k == 0, 1.0, k)
    ah = (k - rho * hh) / (hh * sq)
    ak = (h - rho * kk) / (kk * sq)
    beta = np.where(h * k > 0, 0.0, 0.5)
    out = 0.5 * (ndtr(h) + ndtr(k)) - owens_t(hh, ah) - owens_t(kk, ak) - beta
    # one argument at zero: P = Phi(other)/2 - T(other, -rho/sq)
    out = np.where(h == 0, 0.5 * ndtr(k) - owens_t(k, -rho / sq), out)
    out = np.where(k == 0, 0.5 * ndtr(h) - owens_t(h, -rho / sq), out)
    return np.clip(out, 0.0, 1.0)


def bvn_cdf_adaptive(h: float, k: float, rho: float, epsabs: float = 1e-12) -> float:
    """Scalar reference: ``Phi(h)Phi(k) + int_0^rho phi_2(h, k; t) dt``.

    The correlation integral is taken in the variable ``t = sin(theta)``,
    which removes the endpoint singularity at ``|t| = 1``.
    """
    if rho >= 1.0:
        return float(ndtr(min(h, k)))
    if rho <= -1.0:
        return float(max(ndtr(h) + ndtr(k) - 1.0, 0.0))
    if not (math.isfinite(h) and math.isfinite(k)):
        if h == -math.inf or k == -math.inf:
            return 0.0
        return float(ndtr(min(h, k)))

    def integrand(theta):
        c = math.cos(theta)
        return math.exp(-(h * h + k * k - 2 * h * k * math.sin(theta)) / (2 * c * c))

    val, _ = quad(integrand, 0.0, math.asin(rho), epsabs=epsabs, epsrel=1e-12, limit=200)
    return float(ndtr(h) * ndtr(k) + val / (2 * math.pi))


def borell_M(u, v, s: float, method: str = "owen"):
    """``M(u, v; s)`` on ``[0, 1]^2`` for ``s`` in ``[-1, 1]``.

    ``method="adaptive"`` evaluates scalars by adaptive integration of the
    correlation derivative; ``"owen"`` is the vectorized route.
    """
    if not -1.0 <= s <= 1.0:
        raise ValueError("s must lie in [-1, 1]")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    a, b = ndtri(u), ndtri(v)
    if method == "adaptive":
        flat = [bvn_cdf_adaptive(x, y, s) for x, y in zip(np.ravel(a), np.ravel(b))]
        return np.asarray(flat).reshape(np.broadcast(a, b).shape)
    return bvn_cdf(a, b, s)


def borell_M_derivatives(u, v, s: float) -> dict:
    """Closed-form first and second partial derivatives of ``M`` for ``|s| < 1``."""
    a, b = ndtri(np.asarray(u, dtype=float)), ndtri(np.asarray(v, dtype=float))
    sig = math.sqrt(1 - s * s)
    bu = (b - s * a) / sig
    bv = (a - s * b) / sig
    return {
        "M_u": ndtr(bu),
        "M_v": ndtr(bv),
        "M_uu": -s / sig * _phi(bu) / _phi(a),
        "M_vv": -s / sig * _phi(bv) / _phi(b),
        "M_uv": _phi(bu) / (sig * _phi(b)),
    }


def monge_ampere_residual(u, v, s: float):
    """``M_uu M_vv - s^2 M_uv^2``, which vanishes identically."""
    d = borell_M_derivatives(u, v, s)
    return d["M_uu"] * d["M_vv"] - s * s * d["M_uv"] ** 2


def borell_hessian(u: float, v: float, s: float) -> np.ndarray:
    """The matrix ``[[M_uu, s M_uv], [s M_uv, M_vv]]``."""
    d = borell_M_derivatives(u, v, s)
    return np.array([[d["M_uu"], s * d["M_uv"]], [s * d["M_uv"], d["M_vv"]]], dtype=float)


def interval_probability(a: IntervalUnion, b: IntervalUnion, rho: float) -> float:
    """``P(X in A, Y in B)`` for standard normals with correlation ``rho``."""
    total = 0.0
    for a0, a1 in a.intervals:
        for b0, b1 in b.intervals:
            total += (bvn_cdf(a1, b1, rho) - bvn_cdf(a0, b1, rho)
                      - bvn_cdf(a1, b0, rho) + bvn_cdf(a0, b0, rho))
    return float(total)


def noisy_correlation(r1: float, r2: float, s: float) -> float:
    """Correlation ``s sqrt((1-r1^2)(1-r2^2)) / (1 - r1 r2)`` of the two sets."""
    return s * math.sqrt((1 - r1 * r1) * (1 - r2 * r2)) / (1 - r1 * r2)


def verify_noisy_borell(a: IntervalUnion, b: IntervalUnion, r1: float, r2: float, s: float,
                        nodes: int = 80, tol: float = 1e-9) -> Comparison:
    """Compare ``P(X in A, X_rho in B)`` with ``E M(T_r1 1_A(X), T_r2 1_B(X_rho); s)``.

    For ``s`` in ``(0, 1)`` the probability is at most the expectation; for
    ``s < 0`` the inequality reverses. The margin is oriented so that it is
    non-negative when the predicted direction holds.
    """
    if not (abs(r1) < 1 and abs(r2) < 1 and -1 < s < 1):
        raise ValueError("need |r1|, |r2|, |s| < 1")
    rho = noisy_correlation(r1, r2, s)
    lhs = interval_probability(a, b, rho)
    ta, tb = noise_operator(a, r1), noise_operator(b, r2)
    cov = BlockCovariance.equicorrelated(2, rho)

    def integrand(x):
        u = np.clip(ta(x[:, :1]), 0.0, 1.0)
        v = np.clip(tb(x[:, 1:]), 0.0, 1.0)
        return borell_M(u, v, s)

    fine = expect_quadrature(integrand, cov, nodes)
    coarse = expect_quadrature(integrand, cov, nodes // 2)
    rhs = float(fine)
    margin = rhs - lhs if s >= 0 else lhs - rhs
    return Comparison.build(lhs, rhs, margin, "quadrature", error=abs(fine - coarse), tol=tol,
                            rho=rho, s=s, direction="<=" if s >= 0 else ">=")
