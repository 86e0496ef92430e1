"""The acceptance battery: ten numbered checks over the whole package.

Each ``criterion_N`` returns a :class:`CriterionResult` with a pass flag and
the measured quantities. :func:`run_battery` runs a selection of them.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .borell import borell_M, monge_ampere_residual, verify_noisy_borell
from .flow import FlowSpec, certify_monotone
from .gaussian import BlockCovariance, expect_mc, wick_moment
from .hermite import (HermitePoly, allclose, hermite_basis, ou_generator, ou_generator_monomial,
                      random_poly)
from .local import (HyperParams, check_complex_local, check_fb_complex_local, check_fb_real_local,
                    check_gaussian_jensen, check_imaginary_sandwich, check_real_local,
                    correlated_r_bound)
from .mehler import ExpLinear, GaussPoly, IntervalUnion, Polynomial, random_test_functions
from .pairs import FunctionPair, InnerFunction, OuterFunction
from .results import _jsonable
from .verify import (Budget, SharpConstants, fourier_consistency, gaussian_abs_moment,
                     perturbation_witness, verify_chaos_moments, verify_complex_hc,
                     verify_log_sobolev, verify_noisy_jensen, verify_pq_hausdorff_young,
                     verify_real_hc, verify_rho_hy)

ADMISSIBLE_MARGIN = 1e-3
QUAD = Budget(method="quadrature")


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    seconds: float = 0.0
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} criterion {self.number}: {self.name} ({self.seconds:.1f} s)"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "seconds": self.seconds, "details": _jsonable(self.details)}


def _timed(number: int, name: str, fn: Callable[[], tuple]) -> CriterionResult:
    t0 = time.perf_counter()
    passed, details = fn()
    return CriterionResult(number, name, bool(passed), time.perf_counter() - t0, details)


# ---------------------------------------------------------------- 1

def criterion_1(seed: int = 1) -> CriterionResult:
    """Complex hypercontractivity at ``n = 1, p = 1.5, q = 3, z = i sqrt(0.5)``."""
    def run():
        rng = np.random.default_rng(seed)
        cov = BlockCovariance.identity((1,))
        params = HyperParams((1.5,), 2.0, z=(1j * math.sqrt(0.5),))
        margins = []
        for _ in range(50):
            f = random_poly(rng, 1, int(rng.integers(1, 5)))
            margins.append(verify_complex_hc([f], params, cov, QUAD).margin)
        one = verify_complex_hc([HermitePoly.constant(1)], params, cov, QUAD)
        worst = min(margins)
        gap = abs(one.lhs - one.rhs)
        return worst >= -1e-8 and gap <= 1e-10, {"worst_margin": worst, "constant_gap": gap}
    res = _timed(1, "complex hypercontractivity at the dual-exponent point", run)
    res.passed = res.passed and res.seconds < 10
    return res


# ---------------------------------------------------------------- 2

def criterion_2() -> CriterionResult:
    """The correlated Fourier inequality is attained by Gaussians."""
    def run():
        rho, p = 0.3, 2.0
        cov = BlockCovariance.equicorrelated(2, rho)
        t = p * cov.lam_min
        q = 1 / (cov.lam_max * (1 - 1 / t))
        gs = [GaussPoly(HermitePoly.constant(1), t)] * 2
        comp = verify_pq_hausdorff_young(gs, p, q, cov, QUAD)
        ratio = comp.details["ratio"]
        return abs(ratio - 1) <= 1e-6, {"q": q, "ratio": ratio, "constant": comp.details["constant"],
                                         "fourier_check": comp.details["fourier_check"]}
    res = _timed(2, "Gaussian equality in the block-correlated Fourier inequality", run)
    res.passed = res.passed and res.seconds < 30
    return res


# ---------------------------------------------------------------- 3

def criterion_3() -> CriterionResult:
    """Two-function Fourier constant at ``rho = 0`` against the one-space constant."""
    def run():
        p, q, n = 1.5, 3.0, 1
        c_rho = SharpConstants.rho_hy(p, q, 0.0, n)
        c_bb = SharpConstants.beckner_babenko(p, q, n)
        c_bb_2n = SharpConstants.beckner_babenko(p, q, 2 * n)
        e = GaussPoly(HermitePoly.constant(n), p)
        ratio = verify_rho_hy(e, e, 0.0, p, q).details["ratio"]
        ok_const = abs(c_rho - c_bb) <= 1e-12
        ok_eq = abs(ratio - 1) <= 1e-6
        return ok_const and ok_eq, {"rho_constant": c_rho, "beckner_babenko_n": c_bb,
                                    "beckner_babenko_2n": c_bb_2n, "constant_gap": abs(c_rho - c_bb),
                                    "gap_to_2n": abs(c_rho - c_bb_2n), "equality_ratio": ratio,
                                    "constant_ok": ok_const, "equality_ok": ok_eq}
    return _timed(3, "two-function Fourier constant at zero correlation", run)


# ---------------------------------------------------------------- 4

def _sizes(rng) -> tuple:
    return [(1,), (2,), (3,), (1, 1), (1, 2), (2, 1), (1, 1, 1)][int(rng.integers(7))]


def _sample_config(kind: str, rng):
    """One random configuration and its local report."""
    sizes = _sizes(rng)
    n = len(sizes)
    cov = BlockCovariance.random(rng, sizes, mixing=float(rng.uniform(0, 0.8)))
    p = tuple(rng.uniform(0.3, 4.0, n))
    if kind == "complex":
        if rng.random() < 0.5:
            z = tuple(1j * rng.uniform(-1, 1, n))
        else:
            z = tuple(rng.uniform(0, 1, n) * np.exp(1j * rng.uniform(0, 2 * math.pi, n)))
        params = HyperParams(p, float(rng.uniform(1, 2.5)), z=z)
        return dict(kind=kind, cov=cov, params=params, direction="forward",
                    report=check_complex_local(params, cov))
    if kind == "real":
        direction = "forward" if rng.random() < 0.5 else "reverse"
        alpha = rng.uniform(1, 2.5) if direction == "forward" else rng.uniform(0.2, 1.0)
        params = HyperParams(p, float(alpha), r=tuple(rng.uniform(-1, 1, n)))
        return dict(kind=kind, cov=cov, params=params, direction=direction,
                    family="exp_linear" if rng.random() < 0.5 else "shifted_positive",
                    report=check_real_local(params, cov, direction))
    r = tuple(rng.uniform(-1, 1, n))
    g = rng.standard_normal((n, n))
    if rng.random() < 0.5:
        q = g @ g.T + rng.uniform(0, 0.5) * np.eye(n)
    else:
        q = (g + g.T) / 2
    B = InnerFunction.quadratic(q)
    params = HyperParams(p, 1.0, r=r)
    # the Hessian of a quadratic is constant, so one grid point suffices
    return dict(kind=kind, cov=cov, params=params, direction="forward", B=B,
                report=check_gaussian_jensen(B, r, cov, c_grid=np.zeros((1, n))))


def _global_inputs(cfg: dict, rng) -> list:
    sizes = cfg["cov"].block_sizes
    if cfg["kind"] == "complex":
        return [random_poly(rng, k, int(rng.integers(1, 5))) for k in sizes]
    if cfg["kind"] == "real":
        return random_test_functions(rng, sizes, cfg["family"])
    return [Polynomial(random_poly(rng, k, int(rng.integers(1, 5)), complex_coeffs=False)) for k in sizes]


def _global_check(cfg: dict, fs: list):
    if cfg["kind"] == "complex":
        return verify_complex_hc(fs, cfg["params"], cfg["cov"])
    if cfg["kind"] == "real":
        return verify_real_hc(fs, cfg["params"], cfg["cov"], cfg["direction"])
    return verify_noisy_jensen(cfg["B"], fs, cfg["params"].r, cfg["cov"])


def falsification_record(cfg: dict, rng, inputs: int = 20) -> dict:
    """Run the global side implied by the local margin of one configuration."""
    margin = cfg["report"].margin
    rec = {"kind": cfg["kind"], "sizes": list(cfg["cov"].block_sizes), "margin": margin,
           "direction": cfg["direction"], "alpha": cfg["params"].alpha}
    if margin >= ADMISSIBLE_MARGIN:
        comps = [_global_check(cfg, _global_inputs(cfg, rng)) for _ in range(inputs)]
        rec.update(status="admissible", violations=sum(c.verdict == "violated" for c in comps),
                   inconclusive=sum(c.verdict == "inconclusive" for c in comps),
                   worst_margin=min(c.margin for c in comps))
        rec["ok"] = rec["violations"] == 0
    elif margin <= -ADMISSIBLE_MARGIN:
        fit = perturbation_witness(cfg["kind"], cfg["params"], cfg["cov"], cfg["report"],
                                   B=cfg.get("B"), direction=cfg["direction"])
        rec.update(status="inadmissible", certified=fit.certified, coefficient=fit.coefficient,
                   predicted=fit.predicted, rel_error=fit.rel_error)
        rec["ok"] = fit.certified
    else:
        rec.update(status="boundary", ok=True)
    return rec


def falsification_configs(count: int = 200, seed: int = 4, tries: int = 400) -> list:
    """Seeded configurations cycling complex, real and noisy-Jensen kinds.

    Each configuration is redrawn until its local margin has the targeted
    sign (alternating admissible and inadmissible), so both branches occur.
    """
    out = []
    for i in range(count):
        kind = ("complex", "real", "ngj")[i % 3]
        want_ok = (i // 3) % 2 == 0
        rng = np.random.default_rng([seed, i])
        for _ in range(tries):
            cfg = _sample_config(kind, rng)
            m = cfg["report"].margin
            if (m >= ADMISSIBLE_MARGIN) if want_ok else (m <= -ADMISSIBLE_MARGIN):
                break
        cfg["rng"] = rng
        out.append(cfg)
    return out


def criterion_4(count: int = 200, inputs: int = 20, seed: int = 4) -> CriterionResult:
    """Local margin sign predicts the global outcome on random configurations."""
    def run():
        records = [falsification_record(cfg, cfg.pop("rng"), inputs)
                   for cfg in falsification_configs(count, seed)]
        adm = [r for r in records if r["status"] == "admissible"]
        inad = [r for r in records if r["status"] == "inadmissible"]
        summary = {"configs": len(records), "admissible": len(adm), "inadmissible": len(inad),
                   "boundary": len(records) - len(adm) - len(inad),
                   "violations": sum(r["violations"] for r in adm),
                   "uncertified": sum(not r["certified"] for r in inad),
                   "worst_rel_error": max((r["rel_error"] for r in inad), default=0.0),
                   "failures": [dict(r, index=i) for i, r in enumerate(records) if not r["ok"]]}
        ok = all(r["ok"] for r in records) and adm and inad
        return ok, summary
    res = _timed(4, "local margin predicts global outcome", run)
    res.passed = res.passed and res.seconds < 600
    return res


# ---------------------------------------------------------------- 5

def criterion_5(count: int = 100, seed: int = 5) -> CriterionResult:
    """Imaginary-parameter sandwich versus the complex local matrix, and the
    general-pair checkers versus the specialized ones."""
    def run():
        rng = np.random.default_rng(seed)
        disagree, fb_gap, holds_count = 0, 0.0, 0
        for _ in range(count):
            sizes = _sizes(rng)
            n = len(sizes)
            cov = BlockCovariance.random(rng, sizes, mixing=float(rng.uniform(0, 0.8)))
            s = tuple(rng.uniform(-1, 1, n))
            p = tuple(rng.uniform(1.0, 4.0, n))
            params = HyperParams(p, float(rng.uniform(1, 2.5)), z=tuple(1j * v for v in s), s=s)
            a = check_imaginary_sandwich(params, cov)
            b = check_complex_local(params, cov)
            holds_count += a.holds
            if a.holds != b.holds or (abs(a.margin) > 1e-9 and abs(b.margin) > 1e-9
                                      and np.sign(a.margin) != np.sign(b.margin)):
                disagree += 1
            pair = FunctionPair(OuterFunction.power(params.alpha), InnerFunction.product_of_powers(p))
            fb_gap = max(fb_gap, abs(check_fb_complex_local(pair, params.z, cov).margin - b.margin))
            r = tuple(rng.uniform(-1, 1, n))
            direction = "forward" if rng.random() < 0.5 else "reverse"
            alpha = params.alpha if direction == "forward" else float(rng.uniform(0.2, 1.0))
            rpair = FunctionPair(OuterFunction.power(alpha), InnerFunction.product_of_powers(p))
            spec = check_real_local(HyperParams(p, alpha, r=r), cov, direction)
            fb = check_fb_real_local(rpair, r, cov, direction=direction)
            fb_gap = max(fb_gap, abs(fb.margin - spec.margin))
        return disagree == 0 and fb_gap <= 1e-9, {"disagreements": disagree, "sandwich_holds": holds_count,
                                                   "configs": count, "fb_max_gap": fb_gap}
    return _timed(5, "sandwich and general-pair checkers agree", run)


# ---------------------------------------------------------------- 6

def _real_flow_spec(rng, direction: str) -> FlowSpec:
    for _ in range(1000):
        sizes = [(1,), (2,), (1, 1)][int(rng.integers(3))]
        n = len(sizes)
        cov = BlockCovariance.random(rng, sizes, mixing=float(rng.uniform(0, 0.8)))
        p = tuple(rng.uniform(0.5, 3.0, n))
        alpha = rng.uniform(1, 2.5) if direction == "forward" else rng.uniform(0.2, 1.0)
        r = tuple(rng.uniform(-1, 1, n))
        if check_real_local(HyperParams(p, float(alpha), r=r), cov, direction).margin > ADMISSIBLE_MARGIN:
            pair = FunctionPair(OuterFunction.power(float(alpha)), InnerFunction.product_of_powers(p))
            family = "exp_linear" if rng.random() < 0.5 else "shifted_positive"
            fs = random_test_functions(rng, sizes, family)
            return FlowSpec("real", pair, cov, tuple(fs), r=r, seed=int(rng.integers(2**31)))
    raise RuntimeError("no admissible real configuration found")


def _complex_flow_spec(rng, i: int) -> FlowSpec:
    if i % 2 == 0:
        p = float(rng.uniform(1.1, 1.9))
        q = p / (p - 1)
        cov = BlockCovariance.identity((1,))
        z = (1j * math.sqrt(p - 1),)
        ps = (p,)
    else:
        rho = float(rng.uniform(0.1, 0.6))
        cov = BlockCovariance.equicorrelated(2, rho)
        p = float(1 / cov.lam_min + rng.uniform(0.2, 1.0))
        q = float(p + rng.uniform(0.5, 2.0))
        r = correlated_r_bound(p, q, cov.lam_min)
        z = (r, r)
        ps = (p, p)
    pair = FunctionPair(OuterFunction.power(q / p), InnerFunction.product_of_powers(ps))
    fs = tuple(random_poly(rng, 1, int(rng.integers(1, 4))) for _ in ps)
    return FlowSpec("complex", pair, cov, fs, z=z)


def criterion_6(seed: int = 6) -> CriterionResult:
    """Interpolation profiles move in the predicted direction and hit both sides."""
    def run():
        rng = np.random.default_rng(seed)
        specs = [_real_flow_spec(rng, "forward") for _ in range(5)]
        specs += [_real_flow_spec(rng, "reverse") for _ in range(5)]
        specs += [_complex_flow_spec(rng, i) for i in range(10)]
        rows = []
        for spec in specs:
            rep = certify_monotone(spec)
            rows.append({"variant": spec.variant, "direction": rep.direction, "monotone": rep.monotone,
                         "endpoints": rep.endpoint_check is not None and rep.endpoint_check["consistent"],
                         "gap": rep.endpoint_gap})
        ok = all(r["monotone"] and r["endpoints"] for r in rows)
        return ok, {"flows": rows}
    res = _timed(6, "interpolation profiles are monotone", run)
    res.passed = res.passed and res.seconds < 600
    return res


# ---------------------------------------------------------------- 7

def criterion_7(seed: int = 7) -> CriterionResult:
    """Copula endpoints, the Monge-Ampere identity and the noisy two-set inequality."""
    def run():
        g = np.linspace(0.05, 0.95, 9)
        u, v = np.meshgrid(g, g)
        end0 = float(np.max(np.abs(borell_M(u, v, 0.0) - u * v)))
        end1 = float(np.max(np.abs(borell_M(u, v, 1.0) - np.minimum(u, v))))
        ma = max(float(np.max(np.abs(monge_ampere_residual(u, v, s))))
                 for s in (-0.75, -0.5, -0.25, 0.25, 0.5, 0.75))
        half = verify_noisy_borell(IntervalUnion(((-np.inf, 0.3),)), IntervalUnion(((-np.inf, -0.5),)),
                                   0.4, -0.3, 0.6)
        rng = np.random.default_rng(seed)
        flips = 0
        for _ in range(20):
            sets = []
            for _ in range(2):
                cuts = np.sort(rng.uniform(-2.5, 2.5, 2 * int(rng.integers(1, 4))))
                sets.append(IntervalUnion(tuple(zip(cuts[::2], cuts[1::2]))))
            r1, r2 = rng.uniform(-0.8, 0.8, 2)
            flips += all(verify_noisy_borell(sets[0], sets[1], r1, r2, s).holds for s in (0.6, -0.6))
        ok = end0 <= 1e-9 and end1 <= 1e-9 and ma <= 1e-7 and abs(half.margin) <= 1e-6 and flips == 20
        return ok, {"s0_error": end0, "s1_error": end1, "monge_ampere": ma,
                    "half_line_gap": abs(half.margin), "direction_holds": flips}
    return _timed(7, "noise stability copula", run)


# ---------------------------------------------------------------- 8

def criterion_8(seed: int = 8) -> CriterionResult:
    """Correlated log-Sobolev inequality with the sharp constant."""
    def run():
        rho, p = 0.3, 2.0
        cov = BlockCovariance.equicorrelated(2, rho)
        rng = np.random.default_rng(seed)
        cases = [random_test_functions(rng, (1, 1), "exp_linear") for _ in range(30)]
        w, vecs = np.linalg.eigh(cov.matrix)
        vmin = vecs[:, 0]
        extremal = [[ExpLinear((eps * vmin[0],)), ExpLinear((eps * vmin[1],))] for eps in (0.5, 0.1, 0.01)]
        deficits = [verify_log_sobolev(fs, p, cov).margin for fs in cases]
        k = SharpConstants.log_sobolev(p, cov.lam_min)

        def all_pass(m):
            return all(verify_log_sobolev(fs, p, cov, constant=m * k).holds for fs in cases + extremal)

        lo, hi = 0.5, 1.5
        for _ in range(40):
            mid = (lo + hi) / 2
            lo, hi = (lo, mid) if all_pass(mid) else (mid, hi)
        sqrt_failures = sum(not verify_log_sobolev(fs, p, cov, form="sqrt").holds for fs in cases + extremal)
        ok = min(deficits) >= -1e-8 and hi >= 0.95
        return ok, {"constant": k, "worst_deficit": min(deficits), "smallest_passing_multiplier": hi,
                    "sqrt_form_failures": sqrt_failures, "cases": len(cases) + len(extremal)}
    return _timed(8, "correlated log-Sobolev with sharp constant", run)


# ---------------------------------------------------------------- 9

def criterion_9() -> CriterionResult:
    """Moment comparison for products of homogeneous chaoses."""
    def run():
        h = {1: hermite_basis((1,)), 2: hermite_basis((2,))}
        rows, ok = [], True
        for n, rho in ((1, 0.0), (2, 0.5)):
            cov = BlockCovariance.identity((1,)) if n == 1 else BlockCovariance.equicorrelated(2, rho)
            for p, q in ((2.0, 4.0), (1 / cov.lam_min + 0.5, 4.0)):
                for degs in itertools.product((1, 2), repeat=n):
                    fs = [h[d] for d in degs]
                    cc = verify_chaos_moments(fs, p, q, cov, "complex")
                    cr = verify_chaos_moments(fs, p, q, cov, "real")
                    ratio = cc.details["ratio"]
                    row = {"n": n, "p": p, "q": q, "degrees": list(degs), "ratio": ratio,
                           "complex_bound": cc.details["bound"], "real_bound": cr.details["bound"],
                           "holds": cc.holds and cr.holds}
                    if n == 1 and degs == (1,):
                        exact = gaussian_abs_moment(q) ** (1 / q) / gaussian_abs_moment(p) ** (1 / p)
                        row["moment_gap"] = abs(ratio - exact)
                        row["holds"] = row["holds"] and row["moment_gap"] <= 1e-8
                    ok = ok and row["holds"]
                    rows.append(row)
        return ok, {"cases": rows}
    return _timed(9, "chaos moment bounds", run)


# ---------------------------------------------------------------- 10

def criterion_10(seed: int = 10) -> CriterionResult:
    """Moment, eigenrelation and Fourier oracles of the numerical engine."""
    def run():
        rho = 0.4
        cov = BlockCovariance.equicorrelated(2, rho)
        wick = wick_moment((2, 2), cov)
        wick_gap = abs(wick - (1 + 2 * rho**2))
        mc = expect_mc(lambda x: x[:, 0] ** 2 * x[:, 1] ** 2, cov, 10**6, seed)
        mc_z = abs(mc.estimate - (1 + 2 * rho**2)) / mc.stderr
        bad = 0
        for dim in (1, 2):
            for beta in itertools.product(range(9), repeat=dim):
                if sum(beta) > 8:
                    continue
                hb = hermite_basis(beta)
                target = hb.scale(-sum(beta))
                bad += not (allclose(ou_generator_monomial(hb), target)
                            and allclose(ou_generator(hb), target))
        rng = np.random.default_rng(seed)
        ts = (1.5, 2.0, 4.0)
        fourier = fourier_consistency([random_poly(rng, 1, 3) for _ in ts], ts, seed=seed)
        ok = wick_gap <= 1e-14 and mc_z <= 3 and bad == 0 and fourier <= 1e-7
        return ok, {"wick_gap": wick_gap, "mc_sigmas": mc_z, "eigen_failures": bad,
                    "fourier_gap": fourier}
    return _timed(10, "engine oracles", run)


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10}


def run_battery(numbers=None) -> list:
    """Run the selected criteria (all by default) in order."""
    return [CRITERIA[k]() for k in (numbers or sorted(CRITERIA))]
