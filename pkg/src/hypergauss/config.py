"""JSON experiment configs: schema validation, digests and object builders."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .gaussian import BlockCovariance, CovarianceError
from .hermite import HermitePoly, hermite_basis, random_poly
from .local import HyperParams
from .mehler import (ExpLinear, GaussPoly, HalfspaceIndicator, IntervalUnion, Polynomial,
                     PositivePolynomial, ShiftedPositive)
from .pairs import FunctionPair, InnerFunction, OuterFunction
from .verify import Budget


class ConfigError(ValueError):
    """A config that fails validation; ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def schema() -> dict:
    return json.loads(resources.files("hypergauss").joinpath("config_schema.json").read_text())


def _field_path(parts) -> str:
    return "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in parts).lstrip(".") or "<root>"


def validate(cfg: dict) -> None:
    """Raise :class:`ConfigError` with the field path of the first schema violation."""
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(err.message, _field_path(err.absolute_path))


def digest(cfg: dict) -> str:
    """Stable 64-bit hex digest of the canonical JSON form."""
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.blake2b(text.encode(), digest_size=8).hexdigest()


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated config with command-line overrides applied."""

    raw: dict
    command: str
    seed: int
    budget: Budget
    tolerance: float | None
    base: Path

    @property
    def digest(self) -> str:
        return digest(self.raw)

    def get(self, key, default=None):
        return self.raw.get(key, default)

    def require(self, key):
        if key not in self.raw:
            raise ConfigError("required field missing", key)
        return self.raw[key]


def load(cfg: dict, command: str | None = None, seed: int | None = None, samples: int | None = None,
         nodes: int | None = None, jobs: int | None = None, tolerance: float | None = None,
         base: Path | None = None) -> ExperimentConfig:
    """Validate ``cfg`` and merge overrides (explicit arguments win over the file)."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    validate(cfg)
    cfg = dict(cfg)
    if command is not None:
        if cfg.get("command", command) != command:
            raise ConfigError(f"config is for {cfg['command']!r}, not {command!r}", "command")
        cfg["command"] = command
    if "command" not in cfg:
        raise ConfigError("required field missing", "command")
    budget_raw = dict(cfg.get("budget", {}))
    for key, val in (("samples", samples), ("nodes", nodes), ("jobs", jobs)):
        if val is not None:
            budget_raw[key] = val
    if seed is not None:
        cfg["seed"] = seed
    if tolerance is not None:
        cfg["tolerance"] = tolerance
    if budget_raw:
        cfg["budget"] = budget_raw
    validate(cfg)
    tol = cfg.get("tolerance")
    budget = Budget(method=budget_raw.get("method", "auto"), nodes=budget_raw.get("nodes"),
                    samples=budget_raw.get("samples", Budget.samples), seed=cfg.get("seed", 0),
                    jobs=budget_raw.get("jobs", 1), **({"tol": tol} if tol is not None else {}))
    return ExperimentConfig(cfg, cfg["command"], cfg.get("seed", 0), budget, tol, base or Path("."))


# ---------------------------------------------------------------- builders

def build_covariance(spec: dict, base: Path = Path(".")) -> BlockCovariance:
    kind = spec["kind"]
    try:
        if kind == "identity":
            return BlockCovariance.identity(spec["block_sizes"])
        if kind == "equicorrelated":
            return BlockCovariance.equicorrelated(spec["n"], spec["rho"])
        if kind == "matrix":
            mat = np.asarray(spec["matrix"], dtype=float)
        else:
            path = Path(spec["path"])
            path = path if path.is_absolute() else base / path
            try:
                mat = np.asarray(json.loads(path.read_text()), dtype=float)
            except (OSError, json.JSONDecodeError, ValueError) as exc:
                raise ConfigError(f"cannot read covariance file: {exc}", "covariance.path") from exc
        return BlockCovariance(tuple(spec["block_sizes"]), mat)
    except (CovarianceError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), "covariance") from exc


def _poly(spec: dict, path: str) -> HermitePoly:
    if "dim" not in spec or "terms" not in spec:
        raise ConfigError("polynomial needs dim and terms", path)
    coeffs = {}
    for beta, re, *im in spec["terms"]:
        if len(beta) != spec["dim"]:
            raise ConfigError(f"multi-index {beta} does not match dim {spec['dim']}", path + ".terms")
        coeffs[tuple(beta)] = complex(re, im[0] if im else 0.0)
    return HermitePoly.from_dict(spec["dim"], coeffs, spec.get("basis", "hermite"))


def build_function(spec: dict, path: str, seed: int):
    """A test function or polynomial from its JSON description."""
    kind = spec["kind"]
    if kind == "hermite":
        return hermite_basis(spec["beta"])
    if kind == "random_polynomial":
        rng = np.random.default_rng([seed, spec.get("seed", 0)])
        return random_poly(rng, spec.get("dim", 1), spec.get("degree", 2),
                           complex_coeffs=spec.get("complex", True))
    if kind == "polynomial":
        return _poly(spec, path)
    if kind == "gauss_poly":
        return GaussPoly(_poly(spec, path), spec.get("t", 1.0))
    if kind == "exp_linear":
        return ExpLinear(tuple(spec["a"]), spec.get("c", 1.0))
    if kind == "shifted_positive":
        return ShiftedPositive(_poly(spec, path), spec.get("delta", 1.0))
    if kind == "positive_polynomial":
        return PositivePolynomial(_poly(spec, path))
    if kind == "halfspace":
        return HalfspaceIndicator(spec.get("threshold", 0.0), tuple(spec.get("normal", (1.0,))))
    return IntervalUnion(tuple(tuple(iv) for iv in spec["intervals"]))


def build_functions(cfg: ExperimentConfig) -> list:
    specs = cfg.require("functions")
    out = []
    for i, spec in enumerate(specs):
        try:
            out.append(build_function(spec, f"functions[{i}]", cfg.seed))
        except (KeyError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), f"functions[{i}]") from exc
    return out


def as_real_inputs(fs: list) -> list:
    """Wrap bare polynomials as real-variant test functions."""
    return [Polynomial(f) if isinstance(f, HermitePoly) else f for f in fs]


def as_polys(fs: list, path: str = "functions") -> list:
    for i, f in enumerate(fs):
        if not isinstance(f, HermitePoly):
            raise ConfigError("this command needs polynomial inputs", f"{path}[{i}]")
    return fs


def complex_list(values) -> tuple:
    return tuple(complex(v[0], v[1]) if isinstance(v, list) else complex(v) for v in values)


def build_params(cfg: ExperimentConfig, n: int) -> HyperParams:
    p = cfg.require("p")
    p = tuple(p) if isinstance(p, list) else (p,) * n
    z = complex_list(cfg.get("z")) if cfg.get("z") is not None else None
    try:
        return HyperParams(p, cfg.get("alpha", 1.0), z=z, r=cfg.get("r"), s=cfg.get("s"))
    except ValueError as exc:
        raise ConfigError(str(exc), "p") from exc


def build_inner(spec: dict) -> InnerFunction:
    kind = spec["kind"]
    if kind == "product_of_powers":
        return InnerFunction.product_of_powers(spec["p"])
    if kind == "borell_M":
        return InnerFunction.borell(spec.get("s", 0.0))
    return InnerFunction.quadratic(np.asarray(spec["Q"], dtype=float))


def build_pair(spec: dict) -> FunctionPair:
    f = spec["F"]
    outer = OuterFunction(f["kind"], alpha=f.get("alpha", 1.0), slope=f.get("slope", 1.0),
                          offset=f.get("offset", 0.0))
    return FunctionPair(outer, build_inner(spec["B"]))


def scalar_p(cfg: ExperimentConfig, key: str = "p") -> float:
    v = cfg.require(key)
    if isinstance(v, list):
        if len(set(v)) != 1:
            raise ConfigError("expected a single exponent", key)
        v = v[0]
    if not math.isfinite(v):
        raise ConfigError("must be finite", key)
    return float(v)
