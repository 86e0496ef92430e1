"""Test-function families, the Mehler transform, the noise operator and the
Fourier picture of the Mehler transform at imaginary parameter.

Conventions: ``T_z`` multiplies the Hermite coefficient of ``H_beta`` by
``z**|beta|``; the noise operator is ``T_r f(x) = E f(r x + sqrt(1-r^2) xi)``;
``e_t(x) = exp(-|x|^2 / 2t)``; the Fourier transform is
``g^(w) = (2 pi)^(-k/2) int g(y) exp(-i w.y) dy``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .gaussian import tensor_grid
from .hermite import HermitePoly, evaluate_many, heat_smooth, multiply, scale_arguments, to_hermite


def _points(x, dim: int) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim == 1:
        x = x.reshape(-1, 1) if dim == 1 else x.reshape(1, -1)
    if x.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got {x.shape[1]}")
    return x


class TestFunction:
    """Base class: a function on ``R^dim`` evaluated row-wise on ``(N, dim)`` arrays."""

    __test__ = False  # not a pytest class
    dim: int
    positive = False

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError

    def noise(self, r: float) -> "TestFunction":
        return Smoothed(self, r)


@dataclass(frozen=True)
class Polynomial(TestFunction):
    poly: HermitePoly

    @property
    def dim(self) -> int:
        return self.poly.dim

    def __call__(self, x):
        return evaluate_many(self.poly, _points(x, self.dim))

    def noise(self, r):
        return Polynomial(mehler_transform(self.poly, r))


@dataclass(frozen=True)
class GaussPoly(TestFunction):
    """``h(x) * e_t(x)`` with ``h`` a polynomial and ``t > 0``."""

    poly: HermitePoly
    t: float

    @property
    def dim(self) -> int:
        return self.poly.dim

    def __call__(self, x):
        x = _points(x, self.dim)
        return evaluate_many(self.poly, x) * np.exp(-np.sum(x**2, axis=1) / (2 * self.t))


@dataclass(frozen=True)
class ExpLinear(TestFunction):
    """``c * exp(a . x)`` with ``c > 0``."""

    a: tuple
    c: float = 1.0
    positive = True

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in np.atleast_1d(self.a)))
        if self.c <= 0:
            raise ValueError("ExpLinear needs c > 0")

    @property
    def dim(self) -> int:
        return len(self.a)

    def __call__(self, x):
        x = _points(x, self.dim)
        return self.c * np.exp(x @ np.asarray(self.a))

    def log_values(self, x):
        return math.log(self.c) + _points(x, self.dim) @ np.asarray(self.a)

    def noise(self, r):
        a = np.asarray(self.a)
        return ExpLinear(tuple(r * a), self.c * math.exp(a @ a * (1 - r * r) / 2))


@dataclass(frozen=True)
class HalfspaceIndicator(TestFunction):
    """Indicator of ``{x : normal . x <= threshold}`` with unit ``normal``."""

    threshold: float
    normal: tuple = (1.0,)

    def __post_init__(self):
        u = np.asarray(self.normal, dtype=float)
        object.__setattr__(self, "normal", tuple(u / np.linalg.norm(u)))

    @property
    def dim(self) -> int:
        return len(self.normal)

    def __call__(self, x):
        return (_points(x, self.dim) @ np.asarray(self.normal) <= self.threshold).astype(float)

    def noise(self, r):
        return SmoothedIntervals(((-np.inf, self.threshold),), r, self.normal)


@dataclass(frozen=True)
class IntervalUnion(TestFunction):
    """Indicator of a finite union of disjoint closed intervals on the line."""

    intervals: tuple

    def __post_init__(self):
        ivs = tuple(sorted((float(a), float(b)) for a, b in self.intervals))
        for (a, b), (c, _) in zip(ivs, ivs[1:]):
            if b >= c:
                raise ValueError("intervals must be disjoint")
        if any(a >= b for a, b in ivs):
            raise ValueError("each interval needs a < b")
        object.__setattr__(self, "intervals", ivs)

    dim = 1

    def __call__(self, x):
        x = _points(x, 1)[:, 0]
        out = np.zeros(len(x))
        for a, b in self.intervals:
            out += (x >= a) & (x <= b)
        return out

    def noise(self, r):
        return SmoothedIntervals(self.intervals, r, (1.0,))


@dataclass(frozen=True)
class SmoothedIntervals(TestFunction):
    """Closed form of the noise operator applied to an interval-union indicator
    along direction ``normal``: ``sum Phi((b - r u.x)/s) - Phi((a - r u.x)/s)``."""

    intervals: tuple
    r: float
    normal: tuple = (1.0,)

    @property
    def dim(self) -> int:
        return len(self.normal)

    def __call__(self, x):
        proj = _points(x, self.dim) @ np.asarray(self.normal)
        if abs(self.r) == 1.0:
            return IntervalUnion(self.intervals)((self.r * proj)[:, None])
        s = math.sqrt(1 - self.r**2)
        out = np.zeros(len(proj))
        for a, b in self.intervals:
            out += ndtr((b - self.r * proj) / s) - ndtr((a - self.r * proj) / s)
        return out


@dataclass(frozen=True)
class ShiftedPositive(TestFunction):
    """``|h(x)|^2 + delta`` with ``delta > 0``; strictly positive."""

    poly: HermitePoly
    delta: float
    positive = True

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")

    @property
    def dim(self) -> int:
        return self.poly.dim

    def as_polynomial(self) -> HermitePoly:
        sq = multiply(self.poly, self.poly.conj())
        return to_hermite(sq + HermitePoly.constant(self.dim, self.delta, "monomial"))

    def __call__(self, x):
        return np.abs(evaluate_many(self.poly, _points(x, self.dim))) ** 2 + self.delta

    def noise(self, r):
        # |h|^2 is the polynomial h * conj(h) on real inputs, so smoothing is exact
        return PositivePolynomial(mehler_transform(self.as_polynomial(), r))


@dataclass(frozen=True)
class PositivePolynomial(TestFunction):
    """A real polynomial known to be positive on ``R^dim``; returns real values."""

    poly: HermitePoly
    positive = True

    @property
    def dim(self) -> int:
        return self.poly.dim

    def __call__(self, x):
        return evaluate_many(self.poly, _points(x, self.dim)).real

    def noise(self, r):
        return PositivePolynomial(mehler_transform(self.poly, r))


@dataclass(frozen=True)
class Smoothed(TestFunction):
    """``E f(r x + sqrt(1 - r^2) eta)`` by tensor Gauss-Hermite in ``eta``."""

    base: TestFunction
    r: float
    nodes: int = 40

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def positive(self):
        return self.base.positive

    def __call__(self, x):
        x = _points(x, self.dim)
        eta, w = tensor_grid(self.nodes, self.dim)
        s = math.sqrt(max(1 - self.r**2, 0.0))
        out = np.zeros(len(x), dtype=complex)
        for e, wt in zip(eta, w):
            out += wt * self.base(self.r * x + s * e)
        return out


def mehler_transform(f: HermitePoly, z: complex) -> HermitePoly:
    """``T_z f``: scale the Hermite coefficient of ``H_beta`` by ``z**|beta|``."""
    h = to_hermite(f)
    return HermitePoly.from_dict(h.dim, {b: c * z ** sum(b) for b, c in h.terms}, "hermite")


def noise_operator(f: TestFunction, r: float) -> TestFunction:
    """``T_r f`` for ``r`` in ``[-1, 1]``; exact for every family except ``GaussPoly``."""
    if not -1.0 <= r <= 1.0:
        raise ValueError("noise parameter must lie in [-1, 1]")
    return f.noise(r)


def mehler_via_smoothing(f: HermitePoly, z: complex) -> HermitePoly:
    """``T_z f(x) = E f(z x + sqrt(1 - z^2) eta)`` continued to complex ``z``."""
    return scale_arguments(heat_smooth(f, 1 - z * z), z)


def mehler_kernel_apply(f, z: complex, x, nodes: int = 60) -> np.ndarray:
    """Evaluate ``T_z f`` at the rows of ``x`` by integrating against the Mehler kernel.

    Valid when ``Re 1/(1 - z^2) > 0`` (this covers ``|z| < 1`` and purely
    imaginary ``z``). After the real rescaling ``y = sigma * eta`` with
    ``sigma^2 = 1 / Re(1/(1 - z^2))`` the Gaussian part of the kernel is
    absorbed into the weight and the rest is a smooth phase, which a tensor
    Gauss-Hermite rule integrates accurately.
    """
    f = Polynomial(f) if isinstance(f, HermitePoly) else f
    z = complex(z)
    d = 1 - z * z
    if d == 0 or (1 / d).real <= 0:
        raise ValueError("kernel integral does not converge for this z")
    k = f.dim
    x = _points(x, k).astype(float)
    sigma = math.sqrt(1 / (1 / d).real)
    eta, w = tensor_grid(nodes, k)
    y = sigma * eta
    fy = f(y)
    quad = -np.sum(y**2, axis=1) * (z * z / d) / 2 + np.sum(y**2, axis=1) * (1 - sigma**2) / (2 * sigma**2)
    out = np.empty(len(x), dtype=complex)
    for i, xi in enumerate(x):
        expo = quad - (xi @ xi) * (z * z / d) / 2 + (y @ xi) * (z / d)
        out[i] = np.dot(w, fy * np.exp(expo))
    return out * d ** (-k / 2) * sigma**k


def fourier_transform(h: HermitePoly, t: float, omega, nodes: int = 60) -> np.ndarray:
    """Numerical Fourier transform of ``g = h * e_t`` at the rows of ``omega``.

    Substituting ``y = sqrt(t) eta`` gives
    ``g^(w) = t^(k/2) E[h(sqrt(t) eta) exp(-i sqrt(t) w.eta)]``.
    """
    k = h.dim
    omega = _points(omega, k).astype(float)
    eta, w = tensor_grid(nodes, k)
    hv = evaluate_many(h, math.sqrt(t) * eta) * w
    out = np.empty(len(omega), dtype=complex)
    step = max(1, 200_000 // max(len(eta), 1))
    for s in range(0, len(omega), step):
        phase = np.exp(-1j * math.sqrt(t) * (omega[s:s + step] @ eta.T))
        out[s:s + step] = phase @ hv
    return out * t ** (k / 2)


def gaussian_hat(t: float, omega, k: int) -> np.ndarray:
    """Closed form ``e_t^(w) = t^(k/2) exp(-|w|^2 t / 2)``."""
    omega = _points(omega, k)
    return t ** (k / 2) * np.exp(-np.sum(omega**2, axis=1) * t / 2)


def fourier_ratio(h: HermitePoly, t: float, x, nodes: int = 60) -> np.ndarray:
    """``(g^ / e_t^)(-x sqrt(t-1)/t)`` for ``g = h * e_t`` and ``t >= 1``.

    This equals ``T_{i sqrt(t-1)} h(x)``, which the tests use as an oracle.
    """
    if t < 1:
        raise ValueError("need t >= 1")
    x = _points(x, h.dim).astype(float)
    omega = -x * math.sqrt(t - 1) / t
    ratio = fourier_transform(h, t, omega, nodes) / gaussian_hat(t, omega, h.dim)
    return ratio


def lp_norm(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    """``(sum w |v|^p)^(1/p)`` for quadrature data."""
    return float(np.dot(weights, np.abs(values) ** p) ** (1 / p))


def random_test_functions(rng: np.random.Generator, dims: Sequence[int], kind: str,
                          degree: int = 2) -> list:
    """Random positive test functions, one per block, for real-variant checks."""
    out = []
    for k in dims:
        if kind == "exp_linear":
            out.append(ExpLinear(tuple(0.6 * rng.standard_normal(k)), float(np.exp(0.3 * rng.standard_normal()))))
        elif kind == "shifted_positive":
            h = HermitePoly.from_dict(k, {
                b: 0.5 * (rng.standard_normal() + 1j * rng.standard_normal())
                for b in _indices(k, degree)
            })
            out.append(ShiftedPositive(h, float(0.2 + rng.uniform())))
        else:
            raise ValueError(f"unknown family {kind!r}")
    return out


def _indices(k: int, degree: int):
    return [b for b in itertools.product(range(degree + 1), repeat=k) if sum(b) <= degree]
