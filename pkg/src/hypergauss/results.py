"""Result records shared by the local checkers and global verifiers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Any

import numpy as np

MARGIN_ATOL = 1e-9


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of a local matrix condition.

    ``margin`` is the smallest eigenvalue of the oriented condition matrix
    over the inspected grid, so the condition holds when
    ``margin >= -1e-9 * (1 + scale)``. ``witness`` is a unit eigenvector for
    that eigenvalue (complex for complex conditions) and ``at`` is the grid
    point where it was found.
    """

    holds: bool
    margin: float
    witness: np.ndarray
    scale: float = 1.0
    at: tuple | None = None
    convexity_ok: bool | None = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_margin(cls, margin: float, witness, scale: float = 1.0, **kw) -> "ConditionReport":
        holds = margin >= -MARGIN_ATOL * (1 + abs(scale))
        if kw.get("convexity_ok") is False:
            holds = False
        return cls(bool(holds), float(margin), np.asarray(witness), float(scale), **kw)

    def to_dict(self) -> dict:
        w = np.asarray(self.witness)
        out = {
            "holds": self.holds,
            "margin": self.margin,
            "scale": self.scale,
            "witness": _jsonable(w),
            "at": None if self.at is None else [float(v) for v in self.at],
            "convexity_ok": self.convexity_ok,
        }
        out.update({k: _jsonable(v) for k, v in self.extra.items()})
        return out


@dataclass(frozen=True)
class Comparison:
    """Both sides of a global inequality ``lhs <= rhs`` (after orientation).

    ``margin >= 0`` exactly when the inequality holds. ``stderr`` is a Monte
    Carlo standard error (``method == "mc"``) and ``error`` a deterministic
    error estimate for quadrature.
    """

    lhs: float
    rhs: float
    margin: float
    method: str
    verdict: str
    stderr: float = 0.0
    error: float = 0.0
    details: dict = field(default_factory=dict)

    @classmethod
    def build(cls, lhs, rhs, margin, method: str, stderr: float = 0.0, error: float = 0.0,
              tol: float = MARGIN_ATOL, **details) -> "Comparison":
        lhs, rhs, margin = float(np.real(lhs)), float(np.real(rhs)), float(np.real(margin))
        if not math.isfinite(margin):
            verdict = "inconclusive"
        elif method == "mc":
            verdict = "inconclusive" if abs(margin) < 3 * stderr else ("holds" if margin >= 0 else "violated")
        else:
            slack = tol * (1 + max(abs(lhs), abs(rhs))) + 3 * error
            verdict = "holds" if margin >= -slack else "violated"
        return cls(lhs, rhs, margin, method, verdict, float(stderr), float(error), details)

    @property
    def holds(self) -> bool:
        return self.verdict == "holds"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["details"] = {k: _jsonable(v) for k, v in self.details.items()}
        return d


def _jsonable(v: Any):
    if isinstance(v, np.ndarray):
        if np.iscomplexobj(v):
            return [[float(x.real), float(x.imag)] for x in v.ravel()]
        return v.tolist()
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v
