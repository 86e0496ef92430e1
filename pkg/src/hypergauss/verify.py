"""Both sides of the global inequalities, sharp constants, and perturbative
counterexamples built from the witness of a failed local condition.

Every verifier returns a :class:`~hypergauss.results.Comparison` whose margin
is non-negative exactly when the stated inequality holds. Fractional powers
of moduli are taken in log space, ``exp(p * log max(|v|, 1e-300))``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .gaussian import (BlockCovariance, QUADRATURE_MAX_DIM, expect_mc, expect_piecewise,
                       expect_quadrature, tensor_grid)
from .hermite import HermitePoly, evaluate_many, ou_generator, to_hermite, to_monomial
from .local import HyperParams, _kron_blocks, complex_local_matrix, real_local_matrix
from .mehler import (ExpLinear, GaussPoly, Polynomial, PositivePolynomial, ShiftedPositive,
                     TestFunction, fourier_ratio, mehler_transform, noise_operator)
from .pairs import InnerFunction
from .results import MARGIN_ATOL, Comparison, ConditionReport

LOG_FLOOR = 1e-300
QUAD_MAX_DEGREE = 12
DEFAULT_SAMPLES = 10**6
DEFAULT_NODES = {1: 80, 2: 48, 3: 28, 4: 16, 5: 10, 6: 7}
DEFAULT_EPS = (0.01, 0.02, 0.04, 0.08, 0.16)
WITNESS_RTOL = 0.2


@dataclass(frozen=True)
class Budget:
    """Integration settings. ``method`` is ``auto``, ``quadrature``, ``piecewise`` or ``mc``."""

    method: str = "auto"
    nodes: int | None = None
    samples: int = DEFAULT_SAMPLES
    seed: int = 0
    jobs: int = 1
    tol: float = MARGIN_ATOL


class Estimate(NamedTuple):
    value: float
    error: float
    stderr: float
    method: str
    rule: str


class _Taint:
    """Records whether a log-space power hit the modulus floor with a negative exponent."""

    def __init__(self):
        self.hit = False

    def log_abs(self, v, power: float) -> np.ndarray:
        a = np.abs(v)
        if power < 0 and np.any(a < LOG_FLOOR):
            self.hit = True
        return np.log(np.maximum(a, LOG_FLOOR))


class SharpConstants:
    """Closed-form constants of the sharp inequalities."""

    @staticmethod
    def beckner_babenko(p: float, q: float, n: int) -> float:
        """``p^(n/2p) / q^(n/2q) * (2 pi)^(n/2q - n/2p)`` for dual exponents."""
        return p ** (n / (2 * p)) / q ** (n / (2 * q)) * (2 * math.pi) ** (n / (2 * q) - n / (2 * p))

    @staticmethod
    def pq_hy(p: float, lam_min: float, total_k: int) -> float:
        return (p * lam_min) ** (total_k / 2)

    @staticmethod
    def rho_hy(p: float, q: float, rho: float, n: int) -> float:
        """Constant of the two-function correlated Fourier inequality over ``R^n x R^n``."""
        if not 0 <= rho < 1:
            raise ValueError("rho must lie in [0, 1)")
        a, b = p * (1 - rho), q * (1 + rho)
        return (a ** (n - n / q) / b ** (n / q)
                / (2 * math.pi * math.sqrt(1 - rho * rho)) ** (n / p - n / q))

    @staticmethod
    def chaos_complex(p: float, q: float, lam_min: float, lam_max: float, total_d: int) -> float:
        """``max(1/(p lam_min - 1), q lam_max - 1)^(D/2)``; infinite when ``p lam_min <= 1``."""
        if p * lam_min <= 1:
            return math.inf
        return max(1 / (p * lam_min - 1), q * lam_max - 1) ** (total_d / 2)

    @staticmethod
    def chaos_real(p: float, q: float, lam_min: float, total_d: int) -> float:
        """``((q lam_min - 1)/(p lam_min - 1))^(D/2)``; infinite when ``p lam_min <= 1``."""
        if p * lam_min <= 1:
            return math.inf
        return ((q * lam_min - 1) / (p * lam_min - 1)) ** (total_d / 2)

    @staticmethod
    def log_sobolev(p: float, lam_min: float) -> float:
        """Best constant ``K`` in ``Ent(Pi) <= -K E[Pi sum L f_j / f_j]``: ``p^2 lam / (2 (p lam - 1))``."""
        if p * lam_min <= 1:
            return math.inf
        return p * p * lam_min / (2 * (p * lam_min - 1))

    @staticmethod
    def log_sobolev_sqrt(p: float, lam_min: float) -> float:
        """The square-root variant ``p^2 lam / (2 sqrt(p lam - 1))``, kept for comparison."""
        if p * lam_min <= 1:
            return math.inf
        return p * p * lam_min / (2 * math.sqrt(p * lam_min - 1))


# ---------------------------------------------------------------- integration

def _real_root_parts(f: HermitePoly, width: float = 0.25) -> list:
    """Real parts of the roots of a univariate polynomial lying near the real axis."""
    m = to_monomial(f)
    deg = m.degree
    if deg == 0:
        return []
    c = np.zeros(deg + 1, dtype=complex)
    for (e,), v in m.terms:
        c[deg - e] = v
    return sorted({float(z.real) for z in np.roots(c) if abs(z.imag) <= width * max(1.0, abs(z.real))})


def _kink_breaks(polys_per_block: Sequence[Sequence[HermitePoly]], cov: BlockCovariance):
    """Break points in whitened coordinates for piecewise integration, or ``None``.

    Available when every block is one-dimensional and ``K <= 2``; the factor
    is lower triangular so block 1 depends on ``g1`` only.
    """
    if cov.K > 2 or any(k != 1 for k in cov.block_sizes):
        return None
    a = cov.factor
    roots = [sorted({r for f in fs for r in _real_root_parts(f)}) for fs in polys_per_block]
    outer = [r / a[0, 0] for r in roots[0]]
    if cov.K == 1:
        return outer, None
    inner_roots = roots[1]

    def inner(g1):
        return [(r - a[1, 0] * g1) / a[1, 1] for r in inner_roots]

    return outer, inner


def _pick_method(budget: Budget, cov: BlockCovariance, degree: int, breaks) -> str:
    if budget.method != "auto":
        return budget.method
    if breaks is not None:
        return "piecewise"
    if cov.K <= QUADRATURE_MAX_DIM and degree <= QUAD_MAX_DEGREE:
        return "quadrature"
    return "mc"


def _expect(fn, cov: BlockCovariance, budget: Budget, method: str, breaks=None) -> Estimate:
    if method == "piecewise":
        outer, inner = breaks if breaks is not None else ((), None)
        hw = 14.0 if cov.K == 1 else 9.0
        fine = expect_piecewise(fn, cov, outer, inner, half_width=hw, order=20)
        coarse = expect_piecewise(fn, cov, outer, inner, half_width=hw, order=14)
        return Estimate(float(np.real(fine)), float(abs(fine - coarse)), 0.0, "quadrature", "piecewise")
    if method == "quadrature":
        n = budget.nodes or DEFAULT_NODES[cov.K]
        coarse = expect_quadrature(fn, cov, n)
        fine = expect_quadrature(fn, cov, int(math.ceil(1.5 * n)))
        return Estimate(float(np.real(fine)), float(abs(fine - coarse)), 0.0, "quadrature", "gauss-hermite")
    if method == "mc":
        est = expect_mc(fn, cov, budget.samples, budget.seed, budget.jobs)
        return Estimate(float(np.real(est.estimate)), 0.0, est.stderr, "mc", "monte-carlo")
    raise ValueError(f"unknown integration method {method!r}")


def _norm(est: Estimate, alpha: float):
    """``E^(1/alpha)`` with first-order propagated error and standard error."""
    v = est.value
    if v <= 0 or not math.isfinite(v):
        return float("nan"), math.inf, math.inf
    out = v ** (1 / alpha)
    d = abs(out / (alpha * v))
    return out, d * est.error, d * est.stderr


def _finish(lhs, rhs, margin, le: Estimate, re: Estimate, lerr, rerr, lse, rse,
            budget: Budget, taint: _Taint, **details) -> Comparison:
    method = "mc" if "mc" in (le.method, re.method) else le.method
    comp = Comparison.build(lhs, rhs, margin, method, stderr=math.hypot(lse, rse),
                            error=lerr + rerr, tol=budget.tol, rule=le.rule, tainted=taint.hit,
                            **({"seed": budget.seed} if method == "mc" else {}), **details)
    if taint.hit:
        comp = dataclasses.replace(comp, verdict="inconclusive")
    return comp


def _check_blocks(dims: Sequence[int], cov: BlockCovariance) -> None:
    if tuple(dims) != tuple(cov.block_sizes):
        raise ValueError(f"block dimensions {tuple(dims)} do not match covariance {cov.block_sizes}")


def _log_product(values_fn, x, cov: BlockCovariance, powers: Sequence[float], taint: _Taint):
    acc = np.zeros(len(x))
    for j, (sl, pj) in enumerate(zip(cov.slices, powers)):
        acc = acc + pj * taint.log_abs(values_fn(j, x[:, sl]), pj)
    return acc


# ---------------------------------------------------------------- complex hypercontractivity

def verify_complex_hc(fs: Sequence[HermitePoly], params: HyperParams, cov: BlockCovariance,
                      budget: Budget = Budget()) -> Comparison:
    """``|| prod |T_{z_j} f_j(xi_j)|^{p_j} ||_alpha <= E prod |f_j(xi_j)|^{p_j}``."""
    _check_blocks([f.dim for f in fs], cov)
    if params.z is None:
        raise ValueError("complex mode needs z")
    if params.alpha < 1 or any(p <= 0 for p in params.p):
        raise ValueError("complex mode needs alpha >= 1 and positive exponents")
    tf = [mehler_transform(f, z) for f, z in zip(fs, params.z)]
    taint = _Taint()
    a = params.alpha
    lhs_pow = [a * p for p in params.p]

    def lhs_fn(x):
        return np.exp(_log_product(lambda j, y: evaluate_many(tf[j], y), x, cov, lhs_pow, taint))

    def rhs_fn(x):
        return np.exp(_log_product(lambda j, y: evaluate_many(fs[j], y), x, cov, params.p, taint))

    breaks = _kink_breaks([[f, g] for f, g in zip(fs, tf)], cov)
    method = _pick_method(budget, cov, sum(f.degree for f in fs), breaks)
    le = _expect(lhs_fn, cov, budget, method, breaks)
    re = _expect(rhs_fn, cov, budget, method, breaks)
    lhs, lerr, lse = _norm(le, a)
    rhs = re.value
    return _finish(lhs, rhs, rhs - lhs, le, re, lerr, re.error, lse, re.stderr, budget, taint,
                   inequality="complex_hc", direction="<=")


# ---------------------------------------------------------------- real hypercontractivity

def _is_polynomial_family(f: TestFunction) -> bool:
    return isinstance(f, (Polynomial, PositivePolynomial, ShiftedPositive))


def _family_degree(f: TestFunction) -> int:
    if isinstance(f, (Polynomial, PositivePolynomial)):
        return f.poly.degree
    if isinstance(f, ShiftedPositive):
        return 2 * f.poly.degree
    return 0


def _exp_linear_log_moment(fs: Sequence[ExpLinear], powers: Sequence[float], cov: BlockCovariance) -> float:
    """``log E prod f_j^{powers_j}`` for ``f_j = c_j exp(a_j . x)``."""
    y = np.concatenate([pj * np.asarray(f.a) for f, pj in zip(fs, powers)])
    return sum(pj * math.log(f.c) for f, pj in zip(fs, powers)) + 0.5 * y @ cov.matrix @ y


def verify_real_hc(fs: Sequence[TestFunction], params: HyperParams, cov: BlockCovariance,
                   direction: str = "forward", budget: Budget = Budget()) -> Comparison:
    """``|| prod (T_{r_j} f_j)^{p_j} ||_alpha`` against ``E prod f_j^{p_j}``.

    Forward: lhs <= rhs for ``alpha`` in ``(-inf, 0) U [1, inf)``. Reverse:
    lhs >= rhs for ``alpha`` in ``(0, 1]``. Polynomial inputs enter through
    their absolute value and require positive exponents.
    """
    _check_blocks([f.dim for f in fs], cov)
    if params.r is None:
        raise ValueError("real mode needs r")
    a = params.alpha
    if direction == "forward" and not (a < 0 or a >= 1):
        raise ValueError("forward direction needs alpha < 0 or alpha >= 1")
    if direction == "reverse" and not (0 < a <= 1):
        raise ValueError("reverse direction needs 0 < alpha <= 1")
    if any(p < 0 for p in params.p) and not all(f.positive for f in fs):
        raise ValueError("negative exponents need strictly positive test functions")
    tf = [noise_operator(f, r) for f, r in zip(fs, params.r)]
    taint = _Taint()
    sign = 1.0 if direction == "forward" else -1.0

    if all(isinstance(f, ExpLinear) for f in fs):
        log_lhs = _exp_linear_log_moment(tf, [a * p for p in params.p], cov) / a
        log_rhs = _exp_linear_log_moment(fs, params.p, cov)
        lhs, rhs = math.exp(log_lhs), math.exp(log_rhs)
        return Comparison.build(lhs, rhs, sign * (rhs - lhs), "exact", tol=budget.tol,
                                inequality="real_hc", direction="<=" if sign > 0 else ">=",
                                log_ratio=log_rhs - log_lhs)

    lhs_pow = [a * p for p in params.p]

    def lhs_fn(x):
        return np.exp(_log_product(lambda j, y: tf[j](y), x, cov, lhs_pow, taint))

    def rhs_fn(x):
        return np.exp(_log_product(lambda j, y: fs[j](y), x, cov, params.p, taint))

    breaks = None
    if all(isinstance(f, Polynomial) for f in fs):
        breaks = _kink_breaks([[f.poly, g.poly] for f, g in zip(fs, tf)], cov)
    degree = sum(_family_degree(f) for f in fs)
    method = _pick_method(budget, cov, degree, breaks)
    le = _expect(lhs_fn, cov, budget, method, breaks)
    re = _expect(rhs_fn, cov, budget, method, breaks)
    lhs, lerr, lse = _norm(le, a)
    rhs = re.value
    return _finish(lhs, rhs, sign * (rhs - lhs), le, re, lerr, re.error, lse, re.stderr, budget, taint,
                   inequality="real_hc", direction="<=" if sign > 0 else ">=")


def real_hc_log_ratio(fs: Sequence[ExpLinear], params: HyperParams, cov: BlockCovariance) -> float:
    """``log(rhs / lhs)`` for exponential-linear inputs as the quadratic form ``y^T M y / 2``.

    ``y_j = p_j a_j`` and ``M`` is the real local matrix; this is an
    independent route to the closed form used by :func:`verify_real_hc`.
    """
    y = np.concatenate([p * np.asarray(f.a) for f, p in zip(fs, params.p)])
    return 0.5 * y @ real_local_matrix(params, cov) @ y


# ---------------------------------------------------------------- noisy Jensen

def verify_noisy_jensen(B: InnerFunction, fs: Sequence[Polynomial], r: Sequence[float],
                        cov: BlockCovariance, budget: Budget = Budget()) -> Comparison:
    """``E B(T_{r_1} f_1, ..., T_{r_n} f_n) <= E B(f_1, ..., f_n)`` for real polynomial inputs."""
    _check_blocks([f.dim for f in fs], cov)
    tf = [noise_operator(f, rj) for f, rj in zip(fs, r)]
    taint = _Taint()

    def side(funcs):
        def fn(x):
            cols = [funcs[j](x[:, sl]).real for j, sl in enumerate(cov.slices)]
            return B.value(np.column_stack(cols))
        return fn

    degree = 2 * sum(_family_degree(f) for f in fs)
    method = _pick_method(budget, cov, degree, None)
    le = _expect(side(tf), cov, budget, method)
    re = _expect(side(fs), cov, budget, method)
    return _finish(le.value, re.value, re.value - le.value, le, re, le.error, re.error, le.stderr,
                   re.stderr, budget, taint, inequality="noisy_jensen", direction="<=")


# ---------------------------------------------------------------- Fourier forms

def fourier_consistency(hs: Sequence[HermitePoly], ts: Sequence[float], points: int = 8,
                        seed: int = 0) -> float:
    """Largest relative gap between the numerical Fourier ratio and ``T_{i sqrt(t-1)} h``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for h, t in zip(hs, ts):
        x = rng.standard_normal((points, h.dim))
        direct = evaluate_many(mehler_transform(h, 1j * math.sqrt(t - 1)), x)
        numeric = fourier_ratio(h, t, x)
        worst = max(worst, float(np.max(np.abs(numeric - direct)) / max(1.0, np.max(np.abs(direct)))))
    return worst


def verify_hausdorff_young(gs: Sequence[GaussPoly], p: Sequence[float], alpha: float,
                           cov: BlockCovariance, budget: Budget = Budget()) -> Comparison:
    """``|| prod |(g_j^ / e_{t_j}^)(eta_j)|^{p_j} ||_alpha <= E prod |(g_j / e_{t_j})(xi_j)|^{p_j}``.

    ``eta_j = sqrt(t_j - 1)/t_j xi_j``. The Fourier ratio at ``eta_j`` is
    ``T_{i sqrt(t_j-1)} h_j(-xi_j)``, and ``xi -> -xi`` preserves the law,
    so the lhs is evaluated from the Mehler transform; the numerical Fourier
    transform is compared against it at sample points.
    """
    ts = [g.t for g in gs]
    if any(t < 1 for t in ts):
        raise ValueError("scales must satisfy t >= 1")
    hs = [g.poly for g in gs]
    params = HyperParams(tuple(p), alpha, z=tuple(1j * math.sqrt(t - 1) for t in ts))
    comp = verify_complex_hc(hs, params, cov, budget)
    details = dict(comp.details, inequality="hausdorff_young",
                   fourier_check=fourier_consistency(hs, ts, seed=budget.seed))
    return dataclasses.replace(comp, details=details)


def verify_pq_hausdorff_young(gs: Sequence[GaussPoly], p: float, q: float, cov: BlockCovariance,
                              budget: Budget = Budget()) -> Comparison:
    """``|| e^{|xi|^2/(2 q lam_max)} prod g_j^(mu xi_j) ||_q <= C || e^{|xi|^2/(2 p lam_min)} prod g_j(xi_j) ||_p``

    with ``mu = sqrt(p lam_min - 1)/(p lam_min)`` and ``C = (p lam_min)^{sum k_j / 2}``.
    Each ``g_j`` must be ``h_j e_{p lam_min}``. The transform is taken from
    the closed form ``g^(w) = e_t^(w) T_{i s} h(-w t / s)``.
    """
    _check_blocks([g.dim for g in gs], cov)
    lmin, lmax = cov.lam_min, cov.lam_max
    t = p * lmin
    if not (1 <= p <= q) or abs(1 / t + 1 / (q * lmax) - 1) > 1e-9:
        raise ValueError("need 1 <= p <= q and 1/(p lam_min) + 1/(q lam_max) = 1")
    if any(abs(g.t - t) > 1e-12 * t for g in gs):
        raise ValueError("each g_j must carry the Gaussian factor e_{p lam_min}")
    s = math.sqrt(t - 1)
    mu = s / t
    tf = [mehler_transform(g.poly, 1j * s) for g in gs]
    taint = _Taint()

    def log_hat(j, w):
        # log |g_j^(w)| = log e_t^(w) + log |T h(-w t/s)|
        k = gs[j].dim
        log_e = k / 2 * math.log(t) - t * np.sum(w**2, axis=1) / 2
        return log_e + taint.log_abs(evaluate_many(tf[j], -w * t / s), q)

    def lhs_fn(x):
        acc = np.sum(x**2, axis=1) / (2 * q * lmax)
        for j, sl in enumerate(cov.slices):
            acc = acc + log_hat(j, mu * x[:, sl])
        return np.exp(q * acc)

    def rhs_fn(x):
        acc = np.sum(x**2, axis=1) / (2 * t)
        for j, sl in enumerate(cov.slices):
            y = x[:, sl]
            acc = acc + taint.log_abs(evaluate_many(gs[j].poly, y), p) - np.sum(y**2, axis=1) / (2 * t)
        return np.exp(p * acc)

    breaks = _kink_breaks([[g.poly, h] for g, h in zip(gs, tf)], cov)
    method = _pick_method(budget, cov, sum(g.poly.degree for g in gs), breaks)
    le = _expect(lhs_fn, cov, budget, method, breaks)
    re = _expect(rhs_fn, cov, budget, method, breaks)
    lhs, lerr, lse = _norm(le, q)
    nrm, rerr, rse = _norm(re, p)
    c = SharpConstants.pq_hy(p, lmin, cov.K)
    rhs = c * nrm
    return _finish(lhs, rhs, rhs - lhs, le, re, lerr, c * rerr, lse, c * rse, budget, taint,
                   inequality="pq_hausdorff_young", direction="<=", constant=c, ratio=lhs / rhs,
                   fourier_check=fourier_consistency([g.poly for g in gs], [t] * len(gs),
                                                     seed=budget.seed))


def _gaussian_weighted(fn, precision: np.ndarray, nodes: int):
    """``int fn(v) exp(-v^T P v / 2) dv`` by Gauss-Hermite under ``N(0, P^-1)``, with refinement gap."""
    d = precision.shape[0]
    cov = np.linalg.inv(precision)
    a = np.linalg.cholesky((cov + cov.T) / 2)
    scale = (2 * math.pi) ** (d / 2) / math.sqrt(np.linalg.det(precision))

    def run(n):
        g, w = tensor_grid(n, d)
        return scale * float(np.dot(w, fn(g @ a.T)))

    fine, coarse = run(int(math.ceil(1.5 * nodes))), run(nodes)
    return fine, abs(fine - coarse)


def verify_rho_hy(f: GaussPoly, g: GaussPoly, rho: float, p: float, q: float, nodes: int = 24,
                  tol: float = MARGIN_ATOL) -> Comparison:
    """The two-function correlated Fourier inequality over ``R^n x R^n``::

        [int int |f^(x) g^(y)|^q e^{-rho p q |x-y|^2 / 2}]^{1/q}
            <= C [int int |f(x) g(y)|^p e^{rho |x+y|^2 / (2 (1 - rho^2))}]^{1/p}

    with ``f, g`` carrying the factor ``e_{p(1-rho)}``. The Gaussian parts of
    both integrands are collected into a precision matrix, leaving a
    polynomial-type integrand for tensor quadrature.
    """
    if not 0 <= rho < 1:
        raise ValueError("rho must lie in [0, 1)")
    if abs(1 / (p * (1 - rho)) + 1 / (q * (1 + rho)) - 1) > 1e-9 or not 1 <= p <= q:
        raise ValueError("exponents must satisfy 1/(p(1-rho)) + 1/(q(1+rho)) = 1 with 1 <= p <= q")
    t = p * (1 - rho)
    if abs(f.t - t) > 1e-12 * t or abs(g.t - t) > 1e-12 * t or f.dim != g.dim:
        raise ValueError("f and g must be h * e_{p(1-rho)} on the same space")
    n = f.dim
    s = math.sqrt(t - 1)
    eye, ones = np.eye(n), np.ones((2, 2))
    taint = _Taint()
    tf, tg = mehler_transform(f.poly, 1j * s), mehler_transform(g.poly, 1j * s)

    p_rhs = np.eye(2 * n) * (p / t) - rho / (1 - rho * rho) * np.kron(ones, eye)
    p_lhs = np.eye(2 * n) * (q * t) + rho * p * q * np.kron(np.array([[1, -1], [-1, 1]]), eye)

    def rhs_fn(v):
        lv = taint.log_abs(evaluate_many(f.poly, v[:, :n]), p) + taint.log_abs(evaluate_many(g.poly, v[:, n:]), p)
        return np.exp(p * lv)

    def lhs_fn(v):
        # |f^(x)| = t^{n/2} e^{-t|x|^2/2} |T_{is} h(-x t/s)|; the Gaussian sits in p_lhs
        lv = (taint.log_abs(evaluate_many(tf, -v[:, :n] * t / s), q)
              + taint.log_abs(evaluate_many(tg, -v[:, n:] * t / s), q) + n * math.log(t))
        return np.exp(q * lv)

    il, el = _gaussian_weighted(lhs_fn, p_lhs, nodes)
    ir, er = _gaussian_weighted(rhs_fn, p_rhs, nodes)
    c = SharpConstants.rho_hy(p, q, rho, n)
    lhs = il ** (1 / q)
    rhs = c * ir ** (1 / p)
    err = lhs * el / (q * il) + rhs * er / (p * ir)
    comp = Comparison.build(lhs, rhs, rhs - lhs, "quadrature", error=err, tol=tol,
                            inequality="rho_hausdorff_young", direction="<=", constant=c,
                            ratio=lhs / rhs, tainted=taint.hit)
    return dataclasses.replace(comp, verdict="inconclusive") if taint.hit else comp


# ---------------------------------------------------------------- log-Sobolev

def _generator_ratio(f: TestFunction):
    """``x -> L f(x) / f(x)`` for the families where ``L f`` is available."""
    if isinstance(f, ExpLinear):
        a = np.asarray(f.a)
        return lambda x: a @ a - x @ a
    if isinstance(f, ShiftedPositive):
        poly = f.as_polynomial()
        lf = ou_generator(poly)
        return lambda x: evaluate_many(lf, x).real / evaluate_many(poly, x).real
    if isinstance(f, PositivePolynomial):
        lf = ou_generator(f.poly)
        return lambda x: evaluate_many(lf, x).real / evaluate_many(f.poly, x).real
    raise ValueError(f"generator not available for {type(f).__name__}")


def log_sobolev_terms(fs: Sequence[TestFunction], p: float, cov: BlockCovariance,
                      budget: Budget = Budget()):
    """``(Ent, D, method, error)`` with ``Ent = E[Pi log Pi] - E Pi log E Pi`` and
    ``D = E[Pi sum_j L f_j / f_j]`` for ``Pi = prod f_j(xi_j)^p``."""
    _check_blocks([f.dim for f in fs], cov)
    if all(isinstance(f, ExpLinear) for f in fs):
        a = np.concatenate([np.asarray(f.a) for f in fs])
        b = p * a
        var = float(b @ cov.matrix @ b)
        mass = math.exp(p * sum(math.log(f.c) for f in fs) + var / 2)
        return mass * var / 2, mass * float(a @ a - p * a @ cov.matrix @ a), "exact", 0.0
    ratios = [_generator_ratio(f) for f in fs]
    for f in fs:
        if not f.positive:
            raise ValueError("log-Sobolev inputs must be strictly positive")

    def log_pi(x):
        vals = [f(x[:, sl]).real for f, sl in zip(fs, cov.slices)]
        if any(np.any(v <= 0) for v in vals):
            raise ValueError("test function took a nonpositive value")
        return p * sum(np.log(v) for v in vals)

    def gen(x):
        return sum(r(x[:, sl]) for r, sl in zip(ratios, cov.slices))

    method = _pick_method(dataclasses.replace(budget, method="quadrature") if budget.method == "auto"
                          else budget, cov, 0, None)
    m0 = _expect(lambda x: np.exp(log_pi(x)), cov, budget, method)
    m1 = _expect(lambda x: np.exp(log_pi(x)) * log_pi(x), cov, budget, method)
    d = _expect(lambda x: np.exp(log_pi(x)) * gen(x), cov, budget, method)
    ent = m1.value - m0.value * math.log(m0.value)
    err = m1.error + m0.error * (abs(math.log(m0.value)) + 1) + d.error
    return ent, d.value, m0.method, err


def verify_log_sobolev(fs: Sequence[TestFunction], p: float, cov: BlockCovariance,
                       constant: float | None = None, form: str = "sharp",
                       budget: Budget = Budget()) -> Comparison:
    """Correlated log-Sobolev inequality for ``Pi = prod f_j(xi_j)^p``.

    ``form="sharp"`` checks ``Ent(Pi) <= -K E[Pi sum L f_j / f_j]`` with
    ``K = p^2 lam / (2 (p lam - 1))`` by default. ``form="sqrt"`` checks
    ``Ent(Pi) <= K' E[Pi sum L f_j / f_j]`` with ``K' = p^2 lam / (2 sqrt(p lam - 1))``.
    """
    lam = cov.lam_min
    if p * lam < 1:
        raise ValueError("need p >= 1 / lam_min")
    ent, d, method, err = log_sobolev_terms(fs, p, cov, budget)
    if form == "sharp":
        k = SharpConstants.log_sobolev(p, lam) if constant is None else constant
        rhs = -k * d
    elif form == "sqrt":
        k = SharpConstants.log_sobolev_sqrt(p, lam) if constant is None else constant
        rhs = k * d
    else:
        raise ValueError(f"unknown form {form!r}")
    return Comparison.build(ent, rhs, rhs - ent, method, error=err * (1 + abs(k)), tol=budget.tol,
                            inequality="log_sobolev", direction="<=", constant=k, form=form,
                            entropy=ent, generator_term=d)


# ---------------------------------------------------------------- chaos moments

def homogeneous_degree(f: HermitePoly) -> int:
    """The common Hermite degree of ``f``; raises if ``f`` mixes degrees."""
    degs = {sum(b) for b, _ in to_hermite(f).terms}
    if len(degs) != 1:
        raise ValueError("input is not a homogeneous Gaussian chaos")
    return degs.pop()


def verify_chaos_moments(fs: Sequence[HermitePoly], p: float, q: float, cov: BlockCovariance,
                         variant: str = "complex", budget: Budget = Budget()) -> Comparison:
    """``|| prod f_j ||_q <= bound * || prod f_j ||_p`` for homogeneous chaoses.

    ``variant="complex"`` uses ``max(1/(p lam_min - 1), q lam_max - 1)^(D/2)``,
    ``variant="real"`` uses ``((q lam_min - 1)/(p lam_min - 1))^(D/2)``.
    A degenerate (infinite) bound holds vacuously and is flagged.
    """
    _check_blocks([f.dim for f in fs], cov)
    d_total = sum(homogeneous_degree(f) for f in fs)
    lmin, lmax = cov.lam_min, cov.lam_max
    if not (q >= p and p * lmin >= 1 - 1e-12):
        raise ValueError("need q >= p >= 1 / lam_min")
    if variant == "complex":
        bound = SharpConstants.chaos_complex(p, q, lmin, lmax, d_total)
    elif variant == "real":
        bound = SharpConstants.chaos_real(p, q, lmin, d_total)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    taint = _Taint()

    def moment(power):
        return lambda x: np.exp(_log_product(lambda j, y: evaluate_many(fs[j], y), x, cov,
                                             [power] * len(fs), taint))

    breaks = _kink_breaks([[f] for f in fs], cov)
    method = _pick_method(budget, cov, sum(f.degree for f in fs), breaks)
    eq, ep = _expect(moment(q), cov, budget, method, breaks), _expect(moment(p), cov, budget, method, breaks)
    nq, qerr, qse = _norm(eq, q)
    np_, perr, pse = _norm(ep, p)
    details = dict(inequality="chaos_moments", direction="<=", variant=variant, bound=bound,
                   ratio=nq / np_, degree=d_total)
    if not math.isfinite(bound):
        return Comparison(nq, math.inf, math.inf, eq.method, "holds", 0.0, qerr,
                          dict(details, degenerate=True))
    return _finish(nq, bound * np_, bound * np_ - nq, eq, ep, qerr, bound * perr, qse,
                   bound * pse, budget, taint, **details)


def gaussian_abs_moment(q: float) -> float:
    """``E |X|^q = 2^(q/2) Gamma((q+1)/2) / sqrt(pi)`` for a standard normal ``X``."""
    return 2 ** (q / 2) * math.gamma((q + 1) / 2) / math.sqrt(math.pi)


# ---------------------------------------------------------------- perturbation witness

@dataclass(frozen=True)
class PerturbationFit:
    """Margins along ``f_j = 1 + eps * (linear form)`` and the fitted ``eps^2`` coefficient."""

    comparisons: tuple
    eps: tuple
    coefficient: float
    predicted: float
    rel_error: float
    certified: bool
    verdict: str

    def to_dict(self) -> dict:
        return {"eps": list(self.eps), "margins": [c.margin for c in self.comparisons],
                "coefficient": self.coefficient, "predicted": self.predicted,
                "rel_error": self.rel_error, "certified": self.certified, "verdict": self.verdict,
                "comparisons": [c.to_dict() for c in self.comparisons]}


def _linear_poly(omega: np.ndarray, eps: float, const: float = 1.0) -> HermitePoly:
    k = len(omega)
    coeffs = {(0,) * k: const}
    for i, w in enumerate(omega):
        e = [0] * k
        e[i] = 1
        coeffs[tuple(e)] = eps * w
    return HermitePoly.from_dict(k, coeffs, "monomial")


def _fit_even(eps: np.ndarray, margins: np.ndarray):
    """Least-squares fit of ``m(eps) = c2 eps^2 + c4 eps^4 + c6 eps^6`` on the three smallest eps."""
    order = np.argsort(eps)[:3]
    e, m = eps[order], margins[order]
    basis = np.column_stack([e**2, e**4, e**6])
    coef, *_ = np.linalg.lstsq(basis, m, rcond=None)
    return float(coef[0])


def perturbation_witness(kind: str, params: HyperParams, cov: BlockCovariance,
                         report: ConditionReport, eps_grid: Sequence[float] = DEFAULT_EPS,
                         B: InnerFunction | None = None, direction: str = "forward",
                         budget: Budget = Budget(method="quadrature")) -> PerturbationFit:
    """Evaluate the global inequality on first-order perturbations of constants.

    ``kind`` selects the inequality:

    * ``complex``: ``f_j = 1 + eps eta_j . x`` with ``eta_j = 2 w_j / p_j``;
      the margin is ``eps^2 * 2 <v, M v> + O(eps^4)`` with ``M`` the complex
      local matrix and ``v = (Re w, Im w)``.
    * ``real``: ``f_j = 1 + eps w_j . x / p_j``; margin ``eps^2 <w, M w> / 2``
      with ``M`` the oriented real local matrix.
    * ``ngj``: ``f_j = 1 + eps w_j . x`` for quadratic ``B``; margin
      ``eps^2 <w, N w> / 2`` with ``N = {(1 - r_p r_q) Q_pq cov_pq}``.

    The margins are even in ``eps``. The fitted ``eps^2`` coefficient must
    agree with the prediction within 20% for a certified counterexample.
    """
    w = np.asarray(report.witness)
    pieces = [w[sl] for sl in cov.slices]
    eps = np.asarray(sorted(eps_grid), dtype=float)
    comps = []
    if kind == "complex":
        v = np.concatenate([w.real, w.imag])
        predicted = 2 * float(v @ complex_local_matrix(params, cov) @ v)
        for e in eps:
            fs = [_linear_poly(2 * wj / pj, e) for wj, pj in zip(pieces, params.p)]
            comps.append(verify_complex_hc(fs, params, cov, budget))
    elif kind == "real":
        wr = w.real
        mat = real_local_matrix(params, cov)
        mat = mat if direction == "forward" else -mat
        predicted = 0.5 * float(wr @ mat @ wr)
        for e in eps:
            fs = [Polynomial(_linear_poly(wj.real / pj, e)) for wj, pj in zip(pieces, params.p)]
            comps.append(verify_real_hc(fs, params, cov, direction, budget))
    elif kind == "ngj":
        if B is None or B.kind != "quadratic":
            raise ValueError("ngj witness needs a quadratic B")
        r = np.asarray(params.r if params.r is not None else [0.0] * cov.n)
        wr = w.real
        n_mat = _kron_blocks((1 - np.outer(r, r)) * B.params["Q"], cov)
        predicted = 0.5 * float(wr @ n_mat @ wr)
        for e in eps:
            fs = [Polynomial(_linear_poly(wj.real, e)) for wj in pieces]
            comps.append(verify_noisy_jensen(B, fs, r, cov, budget))
    else:
        raise ValueError(f"unknown witness kind {kind!r}")
    margins = np.array([c.margin for c in comps])
    coef = _fit_even(eps, margins)
    rel = abs(coef - predicted) / max(abs(predicted), 1e-300)
    smallest = comps[int(np.argmin(eps))]
    certified = bool(predicted < 0 and coef < 0 and rel <= WITNESS_RTOL and smallest.verdict == "violated")
    if rel > WITNESS_RTOL:
        verdict = "inconclusive"
    else:
        verdict = "violated" if certified else "holds"
    return PerturbationFit(tuple(comps), tuple(float(e) for e in eps), coef, predicted, float(rel),
                           certified, verdict)
