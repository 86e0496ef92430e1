"""Command-line front end: ``hypergauss <command> --config file.json``.

Exit codes: 0 every check holds, 1 some check is violated, 2 some check is
inconclusive (and none violated), 64 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .battery import run_battery
from .config import (ConfigError, ExperimentConfig, as_polys, as_real_inputs, build_covariance,
                     build_functions, build_inner, build_pair, build_params, complex_list, load,
                     scalar_p)
from .flow import FlowSpec, certify_monotone
from .gaussian import CovarianceError
from .local import (check_complex_local, check_correlated_r_bound, check_fb_complex_local,
                    check_fb_real_local, check_gaussian_jensen, check_imaginary_sandwich,
                    check_real_local, default_c_grid, HyperParams)
from .results import Comparison, ConditionReport, _jsonable
from .verify import (SharpConstants, perturbation_witness, verify_chaos_moments, verify_complex_hc,
                     verify_hausdorff_young, verify_log_sobolev, verify_noisy_jensen,
                     verify_pq_hausdorff_young, verify_real_hc, verify_rho_hy)

EXIT_OK, EXIT_VIOLATED, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 64
SEED_ENV = "HYPERGAUSS_SEED"
WITNESS_MARGIN = 1e-3


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- dispatch

def _cov(cfg: ExperimentConfig):
    return build_covariance(cfg.require("covariance"), cfg.base)


def _condition_record(rep: ConditionReport) -> dict:
    return dict(rep.to_dict(), verdict="holds" if rep.holds else "violated")


def _comparison_record(comp: Comparison) -> dict:
    return dict(comp.to_dict())


def run_check_local(cfg: ExperimentConfig) -> list:
    cov = _cov(cfg)
    mode = cfg.require("mode")
    direction = cfg.get("direction", "forward")
    grid = None
    if cfg.get("grid_points") is not None and ("pair" in cfg.raw or "B" in cfg.raw):
        inner = cfg.raw["pair"]["B"] if "pair" in cfg.raw else cfg.raw["B"]
        grid = default_c_grid(build_inner(inner), cfg.seed, cfg.get("grid_points"))
    if mode == "complex":
        params = build_params(cfg, cov.n)
        rep, kind = check_complex_local(params, cov), "complex"
    elif mode == "sandwich":
        params = build_params(cfg, cov.n)
        if params.s is None and params.z is not None:
            params = type(params)(params.p, params.alpha, z=params.z, s=tuple(z.imag for z in params.z))
        rep, kind = check_imaginary_sandwich(params, cov), None
    elif mode == "real":
        params = build_params(cfg, cov.n)
        rep, kind = check_real_local(params, cov, direction), "real"
    elif mode == "correlated-r":
        r = cfg.require("r")
        rep, kind = check_correlated_r_bound(scalar_p(cfg), cfg.require("q"), cov, r[0]), None
    elif mode == "fb-complex":
        rep = check_fb_complex_local(build_pair(cfg.require("pair")), complex_list(cfg.require("z")), cov, grid)
        kind = None
    elif mode == "fb-real":
        rep = check_fb_real_local(build_pair(cfg.require("pair")), cfg.require("r"), cov, grid, direction)
        kind = None
    elif mode == "gaussian-jensen":
        B = build_inner(cfg.require("B"))
        rep = check_gaussian_jensen(B, cfg.require("r"), cov, grid)
        kind = "ngj" if B.kind == "quadratic" else None
    else:
        raise ConfigError(f"unknown local mode {mode!r}", "mode")
    record = _condition_record(rep)
    record["mode"] = mode
    if kind and rep.margin <= -WITNESS_MARGIN:
        if kind == "ngj":
            params, B = HyperParams((1.0,) * cov.n, 1.0, r=cfg.require("r")), build_inner(cfg.raw["B"])
        else:
            params, B = build_params(cfg, cov.n), None
        fit = perturbation_witness(kind, params, cov, rep, B=B, direction=direction)
        record["perturbation"] = {k: v for k, v in fit.to_dict().items() if k != "comparisons"}
    return [record]


def run_verify_global(cfg: ExperimentConfig) -> list:
    cov = _cov(cfg)
    ineq = cfg.require("inequality")
    fs = build_functions(cfg)
    b = cfg.budget
    if ineq == "complex_hc":
        comp = verify_complex_hc(as_polys(fs), build_params(cfg, cov.n), cov, b)
    elif ineq == "real_hc":
        comp = verify_real_hc(as_real_inputs(fs), build_params(cfg, cov.n), cov,
                              cfg.get("direction", "forward"), b)
    elif ineq == "noisy_jensen":
        comp = verify_noisy_jensen(build_inner(cfg.require("B")), as_real_inputs(fs), cfg.require("r"), cov, b)
    elif ineq == "hausdorff_young":
        p = cfg.require("p")
        p = p if isinstance(p, list) else [p] * cov.n
        comp = verify_hausdorff_young(fs, p, cfg.get("alpha", 1.0), cov, b)
    elif ineq == "pq_hausdorff_young":
        comp = verify_pq_hausdorff_young(fs, scalar_p(cfg), cfg.require("q"), cov, b)
    elif ineq == "rho_hausdorff_young":
        if len(fs) != 2:
            raise ConfigError("needs exactly two functions", "functions")
        comp = verify_rho_hy(fs[0], fs[1], cfg.require("rho"), scalar_p(cfg), cfg.require("q"),
                             tol=b.tol)
    elif ineq == "log_sobolev":
        comp = verify_log_sobolev(fs, scalar_p(cfg), cov, cfg.get("constant"), cfg.get("form", "sharp"), b)
    elif ineq == "chaos":
        comp = verify_chaos_moments(as_polys(fs), scalar_p(cfg), cfg.require("q"), cov,
                                    cfg.get("variant", "complex"), b)
    else:
        raise ConfigError(f"unknown inequality {ineq!r}", "inequality")
    return [_comparison_record(comp)]


def run_flow(cfg: ExperimentConfig) -> list:
    cov = _cov(cfg)
    variant = cfg.get("variant", "real")
    fs = build_functions(cfg)
    if variant == "real":
        fs = as_real_inputs(fs)
    b = cfg.budget
    kw = dict(method=b.method if b.method in ("quadrature", "mc") else "auto", nodes=b.nodes,
              samples=b.samples if "samples" in cfg.get("budget", {}) else FlowSpec.samples,
              seed=cfg.seed, jobs=b.jobs, direction=cfg.get("direction"))
    if cfg.get("s_grid") is not None:
        kw["s_grid"] = tuple(cfg.get("s_grid"))
    spec = FlowSpec(variant, build_pair(cfg.require("pair")), cov, tuple(fs),
                    r=cfg.get("r"), z=complex_list(cfg.get("z")) if cfg.get("z") is not None else None, **kw)
    rep = certify_monotone(spec)
    return [dict(rep.to_dict(), verdict="holds" if rep.holds else "violated")]


def run_constants(cfg: ExperimentConfig) -> list:
    p, q = scalar_p(cfg), cfg.get("q")
    n = cfg.get("n", 1)
    out = {"p": p, "q": q, "n": n}
    if q is not None:
        out["beckner_babenko"] = SharpConstants.beckner_babenko(p, q, n)
        if cfg.get("rho") is not None:
            out["rho_hausdorff_young"] = SharpConstants.rho_hy(p, q, cfg.get("rho"), n)
    if "covariance" in cfg.raw:
        cov = _cov(cfg)
        lmin, lmax = cov.lam_min, cov.lam_max
        out.update(lam_min=lmin, lam_max=lmax, pq_hausdorff_young=SharpConstants.pq_hy(p, lmin, cov.K),
                   log_sobolev=SharpConstants.log_sobolev(p, lmin))
        if q is not None:
            d = cfg.get("degree", None) or cov.n
            out.update(chaos_complex=SharpConstants.chaos_complex(p, q, lmin, lmax, d),
                       chaos_real=SharpConstants.chaos_real(p, q, lmin, d), chaos_total_degree=d)
    out["verdict"] = "holds"
    return [out]


def run_suite(cfg: ExperimentConfig) -> list:
    if cfg.get("suite") == "paper-theorems":
        results = run_battery(cfg.get("criteria"))
        out = []
        for r in results:
            d = r.to_dict()
            d.pop("seconds")
            out.append(dict(d, verdict="holds" if r.passed else "violated"))
        return out
    entries = cfg.get("entries")
    if not entries:
        raise ConfigError("suite needs 'suite' or 'entries'", "suite")
    for i, e in enumerate(entries):
        if e.get("command") in (None, "suite"):
            raise ConfigError("entries need a non-suite command", f"entries[{i}].command")

    def one(i_e):
        i, e = i_e
        try:
            sub = load(dict(e, seed=e.get("seed", cfg.seed)), base=cfg.base)
        except ConfigError as exc:
            raise ConfigError(str(exc), f"entries[{i}]") from exc
        return {"entry": i, "command": sub.command, "config_digest": sub.digest, "records": dispatch(sub)}

    with ThreadPoolExecutor(max_workers=cfg.budget.jobs) as pool:
        rows = list(pool.map(one, enumerate(entries)))
    for row in rows:
        row["verdict"] = summarize(row["records"])
    return rows


COMMANDS = {"check-local": run_check_local, "verify-global": run_verify_global, "flow": run_flow,
            "constants": run_constants, "suite": run_suite}


def dispatch(cfg: ExperimentConfig) -> list:
    try:
        return COMMANDS[cfg.command](cfg)
    except (CovarianceError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def summarize(records: list) -> str:
    verdicts = [r.get("verdict", "holds") for r in records]
    if "violated" in verdicts:
        return "violated"
    if "inconclusive" in verdicts:
        return "inconclusive"
    return "holds"


def run(cfg: ExperimentConfig) -> dict:
    """Run one config and build the report."""
    t0 = time.perf_counter()
    records = dispatch(cfg)
    return {"artifact_version": __version__, "config_digest": cfg.digest, "command": cfg.command,
            "verdict": summarize(records), "records": records,
            "wall_clock_seconds": time.perf_counter() - t0}


# ---------------------------------------------------------------- JSON output

def finite_json(v):
    """Map values to JSON-safe types; non-finite floats become strings."""
    v = _jsonable(v)
    if isinstance(v, dict):
        return {str(k): finite_json(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [finite_json(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    if isinstance(v, np.ndarray):
        return finite_json(v.tolist())
    return v


def dumps(report: dict) -> str:
    return json.dumps(finite_json(report), indent=2, sort_keys=True, allow_nan=False)


# ---------------------------------------------------------------- argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hypergauss", description="Numerical checks of Gaussian hypercontractive inequalities.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file ('-' for stdin)")
        p.add_argument("--out", help="write the JSON report here instead of stdout")
        p.add_argument("--seed", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--nodes", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--tolerance", type=float)
        if name == "constants":
            p.add_argument("-p", type=float)
            p.add_argument("-q", type=float)
            p.add_argument("-n", type=int)
            p.add_argument("--rho", type=float)
        if name == "suite":
            p.add_argument("--name", choices=["paper-theorems"], help="run a built-in suite")
    return parser


def _read_config(args) -> tuple:
    if args.config is None:
        cfg = {}
        if args.command == "constants":
            cfg = {k: v for k, v in (("p", args.p), ("q", args.q), ("n", args.n), ("rho", args.rho))
                   if v is not None}
        elif args.command == "suite" and args.name:
            cfg = {"suite": args.name}
        else:
            raise UsageError("--config is required")
        return cfg, Path(".")
    try:
        text = sys.stdin.read() if args.config == "-" else Path(args.config).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from exc
    if isinstance(cfg, dict) and args.command == "suite" and args.name:
        cfg.setdefault("suite", args.name)
    base = Path(".") if args.config == "-" else Path(args.config).resolve().parent
    return cfg, base


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        raw, base = _read_config(args)
        seed = args.seed
        if seed is None and os.environ.get(SEED_ENV) and isinstance(raw, dict) and "seed" not in raw:
            try:
                seed = int(os.environ[SEED_ENV])
            except ValueError as exc:
                raise UsageError(f"{SEED_ENV} must be an integer") from exc
        cfg = load(raw, args.command, seed, args.samples, args.nodes, args.jobs, args.tolerance, base)
        report = run(cfg)
    except (UsageError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = dumps(report)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return {"holds": EXIT_OK, "violated": EXIT_VIOLATED, "inconclusive": EXIT_INCONCLUSIVE}[report["verdict"]]


if __name__ == "__main__":
    sys.exit(main())
