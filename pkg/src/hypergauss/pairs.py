"""Outer functions ``F`` and multi-argument functions ``B`` with derivatives.

A :class:`FunctionPair` couples a one-variable ``F`` on an interval ``J`` with
``B`` on a rectangle. Supplied derivatives are checked against central finite
differences when the pair is built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .borell import borell_M, borell_M_derivatives

FD_STEP = 1e-5
FD_RTOL = 1e-6


class DerivativeMismatch(ValueError):
    """Raised when supplied derivatives disagree with finite differences."""


@dataclass(frozen=True)
class OuterFunction:
    """``F`` with derivatives. ``kind`` is ``power``, ``identity`` or ``scaled_affine``."""

    kind: str
    alpha: float = 1.0
    slope: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in ("power", "identity", "scaled_affine"):
            raise ValueError(f"unknown F family {self.kind!r}")
        if self.kind == "power" and self.alpha == 0:
            raise ValueError("power family needs alpha != 0")

    @classmethod
    def power(cls, alpha: float) -> "OuterFunction":
        return cls("power", alpha=float(alpha))

    def derivs(self, t):
        """``(F, F', F'')`` at ``t``."""
        t = np.asarray(t, dtype=float)
        if self.kind == "power":
            a = self.alpha
            return t**a, a * t ** (a - 1), a * (a - 1) * t ** (a - 2)
        slope = 1.0 if self.kind == "identity" else self.slope
        off = 0.0 if self.kind == "identity" else self.offset
        return slope * t + off, np.full_like(t, slope), np.zeros_like(t)

    def kappa(self, t, real: bool = False):
        """``(k, k', k'')`` for ``k = F''/F'`` (or ``F''/|F'|`` when ``real``)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "power":
            a = self.alpha
            sign = math.copysign(1.0, a) if real else 1.0
            c = (a - 1) * sign
            return c / t, -c / t**2, 2 * c / t**3
        z = np.zeros_like(t)
        return z, z, z

    def sample_domain(self, rng, m: int):
        return rng.uniform(0.2, 3.0, m) if self.kind == "power" else rng.uniform(-3.0, 3.0, m)

    def to_dict(self) -> dict:
        if self.kind == "power":
            return {"kind": "power", "alpha": self.alpha}
        if self.kind == "identity":
            return {"kind": "identity"}
        return {"kind": "scaled_affine", "slope": self.slope, "offset": self.offset}


@dataclass(frozen=True, eq=False)
class InnerFunction:
    """``B`` on a rectangle with value, gradient and Hessian.

    ``kind`` is ``product_of_powers`` (``prod c_j^{p_j}`` on the positive
    orthant), ``borell_M`` (two arguments in ``(0, 1)``), ``quadratic``
    (``c^T Q c / 2``) or ``user`` (callables).
    """

    kind: str
    n: int
    params: dict = field(default_factory=dict)
    value_fn: Callable | None = None
    grad_fn: Callable | None = None
    hess_fn: Callable | None = None

    @classmethod
    def product_of_powers(cls, p: Sequence[float]) -> "InnerFunction":
        return cls("product_of_powers", len(p), {"p": tuple(float(x) for x in p)})

    @classmethod
    def borell(cls, s: float) -> "InnerFunction":
        return cls("borell_M", 2, {"s": float(s)})

    @classmethod
    def quadratic(cls, q) -> "InnerFunction":
        q = np.asarray(q, dtype=float)
        return cls("quadratic", q.shape[0], {"Q": (q + q.T) / 2})

    @classmethod
    def user(cls, n: int, value_fn, grad_fn, hess_fn, low=0.0, high=1.0) -> "InnerFunction":
        return cls("user", n, {"low": low, "high": high}, value_fn, grad_fn, hess_fn)

    def derivs(self, c):
        """``(B, grad B, Hessian B)`` at the point ``c``."""
        c = np.asarray(c, dtype=float)
        if self.kind == "product_of_powers":
            p = np.asarray(self.params["p"])
            b = float(np.prod(c**p))
            g = p * b / c
            h = (np.outer(p, p) - np.diag(p)) * b / np.outer(c, c)
            return b, g, h
        if self.kind == "borell_M":
            s = self.params["s"]
            b = float(borell_M(c[0], c[1], s))
            d = borell_M_derivatives(c[0], c[1], s)
            g = np.array([d["M_u"], d["M_v"]], dtype=float)
            h = np.array([[d["M_uu"], d["M_uv"]], [d["M_uv"], d["M_vv"]]], dtype=float)
            return b, g, h
        if self.kind == "quadratic":
            q = self.params["Q"]
            return float(c @ q @ c / 2), q @ c, q.copy()
        return float(self.value_fn(c)), np.asarray(self.grad_fn(c), float), np.asarray(self.hess_fn(c), float)

    def value(self, c):
        """``B`` evaluated row-wise on an ``(N, n)`` array."""
        c = np.atleast_2d(np.asarray(c, dtype=float))
        if self.kind == "product_of_powers":
            p = np.asarray(self.params["p"])
            return np.exp(np.log(np.maximum(c, 1e-300)) @ p)
        if self.kind == "borell_M":
            return borell_M(np.clip(c[:, 0], 0, 1), np.clip(c[:, 1], 0, 1), self.params["s"])
        if self.kind == "quadratic":
            return np.einsum("ni,ij,nj->n", c, self.params["Q"], c) / 2
        return np.array([self.value_fn(row) for row in c])

    def grid_axes(self):
        if self.kind == "product_of_powers":
            return np.logspace(-2, 2, 9)
        if self.kind == "borell_M":
            return np.linspace(0.02, 0.98, 9)
        if self.kind == "quadratic":
            return np.linspace(-3, 3, 9)
        return np.linspace(self.params["low"], self.params["high"], 11)[1:-1]

    def sample_domain(self, rng, m: int):
        if self.kind == "product_of_powers":
            return np.exp(rng.uniform(math.log(1e-2), math.log(1e2), (m, self.n)))
        if self.kind == "borell_M":
            return rng.uniform(0.02, 0.98, (m, self.n))
        if self.kind == "quadratic":
            return rng.uniform(-3, 3, (m, self.n))
        lo, hi = self.params["low"], self.params["high"]
        return lo + (hi - lo) * rng.uniform(0.05, 0.95, (m, self.n))

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for k, v in self.params.items():
            out[k] = v.tolist() if isinstance(v, np.ndarray) else (list(v) if isinstance(v, tuple) else v)
        return out


@dataclass(frozen=True)
class FunctionPair:
    F: OuterFunction
    B: InnerFunction

    def __post_init__(self):
        check_derivatives(self, np.random.default_rng(12345))


def _rel_err(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def check_derivatives(pair: FunctionPair, rng, points: int = 16) -> None:
    """Compare supplied derivatives with central differences at interior points."""
    h = FD_STEP
    for c in pair.B.sample_domain(rng, points):
        _, g, hess = pair.B.derivs(c)
        step = h * np.maximum(np.abs(c), 1.0) if pair.B.kind != "borell_M" else np.full(len(c), h)
        fd_g = np.empty(len(c))
        fd_h = np.empty((len(c), len(c)))
        for i in range(len(c)):
            e = np.zeros(len(c))
            e[i] = step[i]
            fd_g[i] = (pair.B.derivs(c + e)[0] - pair.B.derivs(c - e)[0]) / (2 * step[i])
            fd_h[i] = (pair.B.derivs(c + e)[1] - pair.B.derivs(c - e)[1]) / (2 * step[i])
        if _rel_err(g, fd_g) > FD_RTOL or _rel_err(hess, fd_h) > FD_RTOL:
            raise DerivativeMismatch(f"B derivatives disagree with finite differences at {c}")
    for t in pair.F.sample_domain(rng, points):
        step = h * max(abs(t), 1.0)
        f0, f1, f2 = pair.F.derivs(t)
        d1 = (pair.F.derivs(t + step)[0] - pair.F.derivs(t - step)[0]) / (2 * step)
        d2 = (pair.F.derivs(t + step)[1] - pair.F.derivs(t - step)[1]) / (2 * step)
        if _rel_err(f1, d1) > FD_RTOL or _rel_err(f2, d2) > FD_RTOL:
            raise DerivativeMismatch(f"F derivatives disagree with finite differences at {t}")
