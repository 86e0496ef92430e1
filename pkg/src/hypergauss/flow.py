"""The two-parameter heat-flow interpolation ``C(s)`` between the two sides of
the noisy Jensen-type inequalities, in the real and the complex setting.

With ``xi = A x`` (``A`` the Cholesky factor of the block covariance, block
rows ``A_p``), the real profile is::

    C(s) = int F( int B(g_1, ..., g_n) dgamma(u) ) dgamma(x),
    g_p  = E f_p( A_p (sqrt(s) u + r_p sqrt(1-s) x) + sqrt((1-r_p^2)(1-s)) eta ),

so ``C(0) = E F(B(T_r f(xi)))`` and ``C(1) = F(E B(f(xi)))``. The complex
profile replaces ``g_p`` by ``q_p = E l_p(sqrt(s)(A_p u + i v) + z_p sqrt(1-s)(A_p x + i y))``
where ``l_p`` carries the Hermite coefficients of ``f_p`` as monomial
coefficients, and evaluates ``B(|q_1|, ..., |q_n|)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .gaussian import BlockCovariance, standard_normals, tensor_grid
from .hermite import HermitePoly, evaluate_many, heat_smooth, to_hermite
from .local import HyperParams
from .mehler import (ExpLinear, HalfspaceIndicator, IntervalUnion, Polynomial, PositivePolynomial,
                     ShiftedPositive, TestFunction)
from .pairs import FunctionPair
from .verify import Budget, verify_complex_hc, verify_noisy_jensen, verify_real_hc

DEFAULT_S_GRID = tuple(round(0.1 * i, 10) for i in range(11))
DEFAULT_FLOW_NODES = {1: 40, 2: 20}
DEFAULT_FLOW_SAMPLES = 200_000
INNER_NODES_BUDGET = 1024
MIN_OUTER_SAMPLES = 1000
RANGE_SAMPLES = 10_000
FLOW_RTOL = 1e-10


class FlowDomainError(ValueError):
    """A test function leaves the domain of ``B``."""


def _box(pair: FunctionPair):
    b = pair.B
    if b.kind == "product_of_powers":
        return 0.0, math.inf, False
    if b.kind == "borell_M":
        return 0.0, 1.0, True
    if b.kind == "quadratic":
        return -math.inf, math.inf, True
    return b.params["low"], b.params["high"], True


@dataclass(frozen=True, eq=False)
class FlowSpec:
    """Inputs of one interpolation profile.

    ``functions`` are positive :class:`TestFunction` objects (real variant)
    or :class:`HermitePoly` objects (complex variant), one per block.
    ``direction`` is ``forward`` (nondecreasing profile) or ``reverse``; it
    defaults to the orientation implied by the outer function.
    """

    variant: str
    pair: FunctionPair
    cov: BlockCovariance
    functions: tuple
    r: tuple | None = None
    z: tuple | None = None
    s_grid: tuple = DEFAULT_S_GRID
    method: str = "auto"
    nodes: int | None = None
    samples: int = DEFAULT_FLOW_SAMPLES
    seed: int = 0
    jobs: int = 1
    direction: str | None = None
    checks: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple(self.functions))
        grid = tuple(float(s) for s in self.s_grid)
        if len(grid) < 5 or any(b <= a for a, b in zip(grid[:-1], grid[1:])) or grid[0] < 0 or grid[-1] > 1:
            raise ValueError("s_grid must be sorted in [0, 1] with at least 5 points")
        object.__setattr__(self, "s_grid", grid)
        if len(self.functions) != self.cov.n or self.pair.B.n != self.cov.n:
            raise ValueError("need one function per block and B with n arguments")
        if self.variant == "real":
            if self.r is None:
                raise ValueError("real flow needs r")
            object.__setattr__(self, "r", tuple(float(v) for v in self.r))
            self._check_ranges()
        elif self.variant == "complex":
            if self.z is None:
                raise ValueError("complex flow needs z")
            if any(abs(complex(v)) > 1 + 1e-12 for v in self.z):
                raise ValueError("complex flow needs |z_p| <= 1")
            object.__setattr__(self, "z", tuple(complex(v) for v in self.z))
            if self.pair.B.kind not in ("product_of_powers", "user"):
                raise ValueError("complex flow needs B defined on the positive orthant")
        else:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.direction is None:
            object.__setattr__(self, "direction", _default_direction(self))
        if self.direction not in ("forward", "reverse"):
            raise ValueError("direction must be forward or reverse")

    def _check_ranges(self) -> None:
        lo, hi, closed = _box(self.pair)
        rng = np.random.default_rng(self.seed)
        for j, f in enumerate(self.functions):
            x = 2.0 * rng.standard_normal((RANGE_SAMPLES, f.dim))
            v = np.real(f(x))
            bad = (v < lo) | (v > hi) if closed else (v <= lo) | (v >= hi)
            if np.any(bad) or not np.all(np.isfinite(v)):
                raise FlowDomainError(f"function {j} leaves the domain of B")
        self.checks["range_samples"] = RANGE_SAMPLES

    @property
    def increasing(self) -> bool:
        return self.direction == "forward"


def _default_direction(spec: FlowSpec) -> str:
    if spec.variant == "complex":
        return "forward"
    F = spec.pair.F
    if F.kind == "power" and 0 < F.alpha < 1:
        return "reverse"
    return "forward"


# ---------------------------------------------------------------- inner smoothing

def gaussian_average(f: TestFunction, means: np.ndarray, sigma: float) -> np.ndarray:
    """``E f(m + sigma eta)`` for each row ``m`` of ``means``, ``eta`` standard normal."""
    if sigma == 0:
        return np.real(f(means))
    if isinstance(f, ExpLinear):
        a = np.asarray(f.a)
        return f.c * np.exp(means @ a + sigma**2 * (a @ a) / 2)
    if isinstance(f, (Polynomial, PositivePolynomial)):
        return evaluate_many(heat_smooth(f.poly, sigma**2), means).real
    if isinstance(f, ShiftedPositive):
        return evaluate_many(heat_smooth(f.as_polynomial(), sigma**2), means).real
    if isinstance(f, HalfspaceIndicator):
        return ndtr((f.threshold - means @ np.asarray(f.normal)) / sigma)
    if isinstance(f, IntervalUnion):
        m = means[:, 0]
        return sum(ndtr((b - m) / sigma) - ndtr((a - m) / sigma) for a, b in f.intervals)
    eta, w = tensor_grid(24, f.dim)
    return np.array([np.dot(w, np.real(f(row + sigma * eta))) for row in means])


def monomial_twin(f: HermitePoly) -> HermitePoly:
    """The polynomial whose monomial coefficients are the Hermite coefficients of ``f``."""
    h = to_hermite(f)
    return HermitePoly(h.dim, h.terms, "monomial")


# ---------------------------------------------------------------- profile evaluation

@dataclass(frozen=True)
class _Rule:
    gu: np.ndarray
    wu: np.ndarray
    gx: np.ndarray
    wx: np.ndarray
    mc: bool


def _rules(spec: FlowSpec, refine: bool = False) -> _Rule:
    k = spec.cov.K
    method = spec.method
    if method == "auto":
        method = "quadrature" if k <= 2 else "mc"
    if method == "quadrature":
        n = spec.nodes or DEFAULT_FLOW_NODES.get(k, 8)
        if refine:
            n = int(math.ceil(1.5 * n))
        g, w = tensor_grid(n, k)
        return _Rule(g, w, g, w, False)
    if method != "mc":
        raise ValueError(f"unknown flow method {method!r}")
    # the inner average uses a fixed tensor rule so that F sees an accurate
    # conditional mean; the outer average is Monte Carlo over shared samples
    n_in = max(3, int(INNER_NODES_BUDGET ** (1 / k)))
    gu, wu = tensor_grid(n_in, k)
    outer = max(spec.samples // len(wu), MIN_OUTER_SAMPLES)
    gx = standard_normals(spec.seed, 0, outer, k)
    return _Rule(gu, wu, gx, np.full(outer, 1 / outer), True)


def _block_values(spec: FlowSpec, s: float, rule: _Rule) -> list:
    """Per block, the ``(Nx, Nu)`` array of smoothed values (moduli in the complex case)."""
    a = spec.cov.factor
    nx, nu = len(rule.gx), len(rule.gu)
    out = []
    for j, sl in enumerate(spec.cov.slices):
        ap = a[sl]
        ux = rule.gu @ ap.T
        xx = rule.gx @ ap.T
        if spec.variant == "real":
            r = spec.r[j]
            means = (math.sqrt(s) * ux[None, :, :] + r * math.sqrt(1 - s) * xx[:, None, :]).reshape(nx * nu, -1)
            sigma = math.sqrt(max((1 - r * r) * (1 - s), 0.0))
            vals = gaussian_average(spec.functions[j], means, sigma)
        else:
            z = spec.z[j]
            ell = heat_smooth(monomial_twin(spec.functions[j]), -(s + z * z * (1 - s)))
            pts = (math.sqrt(s) * ux[None, :, :] + z * math.sqrt(1 - s) * xx[:, None, :]).reshape(nx * nu, -1)
            vals = np.abs(evaluate_many(ell, pts))
        out.append(np.asarray(vals, dtype=float).reshape(nx, nu))
    return out


def _outer_values(spec: FlowSpec, s: float, rule: _Rule) -> np.ndarray:
    """``F( sum_u w_u B(g(u, x)) )`` for every outer node ``x``."""
    blocks = _block_values(spec, s, rule)
    nx, nu = blocks[0].shape
    bvals = spec.pair.B.value(np.stack([b.ravel() for b in blocks], axis=1)).reshape(nx, nu)
    inner = bvals @ rule.wu
    return np.asarray(spec.pair.F.derivs(inner)[0], dtype=float)


def _profile(spec: FlowSpec, rule: _Rule) -> np.ndarray:
    """Rows of per-``x`` outer values, one row per grid point."""
    if spec.jobs > 1:
        with ThreadPoolExecutor(spec.jobs) as pool:
            rows = list(pool.map(lambda s: _outer_values(spec, s, rule), spec.s_grid))
    else:
        rows = [_outer_values(spec, s, rule) for s in spec.s_grid]
    return np.vstack(rows)


def flow_value(spec: FlowSpec, s: float) -> float:
    if not 0 <= s <= 1:
        raise ValueError("s must lie in [0, 1]")
    rule = _rules(spec)
    return float(_outer_values(spec, s, rule) @ rule.wx)


def real_flow_value(spec: FlowSpec, s: float) -> float:
    """``C(s)`` for a real-variant spec."""
    if spec.variant != "real":
        raise ValueError("not a real-variant spec")
    return flow_value(spec, s)


def complex_flow_value(spec: FlowSpec, s: float) -> float:
    """``C(s)`` for a complex-variant spec."""
    if spec.variant != "complex":
        raise ValueError("not a complex-variant spec")
    return flow_value(spec, s)


# ---------------------------------------------------------------- certification

@dataclass(frozen=True)
class FlowReport:
    s: tuple
    values: tuple
    errors: tuple
    direction: str
    pair_ok: tuple
    monotone: bool
    endpoint_gap: float
    endpoint_check: dict | None
    method: str
    paired_stderr: tuple = ()

    @property
    def holds(self) -> bool:
        ok = self.endpoint_check is None or self.endpoint_check["consistent"]
        return self.monotone and ok

    def to_dict(self) -> dict:
        return {"s": list(self.s), "values": list(self.values), "errors": list(self.errors),
                "direction": self.direction, "pair_ok": list(self.pair_ok), "monotone": self.monotone,
                "endpoint_gap": self.endpoint_gap, "endpoint_check": self.endpoint_check,
                "method": self.method, "paired_stderr": list(self.paired_stderr), "holds": self.holds}


def _global_sides(spec: FlowSpec):
    """``(C(0), C(1), tolerance)`` predicted by a global verifier, when one applies."""
    F, B = spec.pair.F, spec.pair.B
    budget = Budget(method="quadrature" if spec.cov.K <= 2 else "auto", seed=spec.seed)
    if F.kind == "power" and B.kind == "product_of_powers" and F.alpha > 0:
        a = F.alpha
        p = B.params["p"]
        if spec.variant == "complex":
            if a < 1:
                return None
            comp = verify_complex_hc(list(spec.functions), HyperParams(p, a, z=spec.z), spec.cov, budget)
        else:
            direction = "forward" if a >= 1 else "reverse"
            comp = verify_real_hc(list(spec.functions), HyperParams(p, a, r=spec.r), spec.cov, direction, budget)
        lhs, rhs = comp.lhs**a, comp.rhs**a
        slack = a * (comp.error + 3 * comp.stderr) * max(lhs, rhs) / max(min(comp.lhs, comp.rhs), 1e-300)
        return lhs, rhs, slack
    if (F.kind == "identity" and spec.variant == "real"
            and all(isinstance(f, Polynomial) for f in spec.functions)):
        comp = verify_noisy_jensen(B, list(spec.functions), spec.r, spec.cov, budget)
        return comp.lhs, comp.rhs, comp.error + 3 * comp.stderr
    return None


def certify_monotone(spec: FlowSpec, endpoint_check: bool = True) -> FlowReport:
    """Evaluate the profile on the grid and test the expected direction pairwise.

    Quadrature profiles carry a refinement error per point; Monte Carlo
    profiles use one shared sample set, so adjacent differences have paired
    standard errors. A pair passes when its step has the expected sign up to
    three error units.
    """
    rule = _rules(spec)
    rows = _profile(spec, rule)
    values = rows @ rule.wx
    if rule.mc:
        errors = rows.std(axis=1, ddof=1) / math.sqrt(rows.shape[1])
        diffs = np.diff(rows, axis=0)
        paired = diffs.std(axis=1, ddof=1) / math.sqrt(rows.shape[1])
        step_err = 3 * paired
        method = "mc"
    else:
        fine = _profile(spec, _rules(spec, refine=True)) @ _rules(spec, refine=True).wx
        errors = np.abs(fine - values)
        values = fine
        paired = np.zeros(len(values) - 1)
        step_err = 3 * (errors[:-1] + errors[1:])
        method = "quadrature"
    scale = FLOW_RTOL * (1 + np.max(np.abs(values)))
    steps = np.diff(values)
    sign = 1.0 if spec.increasing else -1.0
    pair_ok = tuple(bool(sign * d >= -(e + scale)) for d, e in zip(steps, step_err))
    check = None
    if endpoint_check and spec.s_grid[0] == 0 and spec.s_grid[-1] == 1:
        sides = _global_sides(spec)
        if sides is not None:
            lhs, rhs, slack = sides
            tol = slack + 3 * (errors[0] + errors[-1]) + 1e-8 * (1 + abs(lhs) + abs(rhs))
            gap0, gap1 = abs(values[0] - lhs), abs(values[-1] - rhs)
            check = {"global_lhs": lhs, "global_rhs": rhs, "start_gap": float(gap0),
                     "end_gap": float(gap1), "tolerance": float(tol),
                     "consistent": bool(gap0 <= tol and gap1 <= tol)}
    return FlowReport(spec.s_grid, tuple(float(v) for v in values), tuple(float(e) for e in errors),
                      "nondecreasing" if spec.increasing else "nonincreasing", pair_ok, all(pair_ok),
                      float(values[0] - values[-1]), check, method, tuple(float(v) for v in paired))
