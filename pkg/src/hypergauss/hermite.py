"""Sparse multivariate polynomials in the monomial or probabilists' Hermite basis.

The Hermite polynomial of multi-index ``beta`` is
``H_beta(x) = E prod_i (x_i + i*xi_i)**beta_i`` with ``xi`` standard normal,
so ``He_2(x) = x**2 - 1``. Both bases are related by a heat-flow of variance
``-1`` (Hermite to monomial) or ``+1`` (monomial to Hermite), which is how the
conversions below are implemented.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

DEGREE_CAP = 16
BASES = ("monomial", "hermite")

MultiIndex = tuple
Scalar = Union[int, float, complex]


class CapacityError(ValueError):
    """Raised when a polynomial would exceed the supported degree."""


def multi_index(exponents: Iterable[int]) -> MultiIndex:
    """Validate and freeze an exponent vector."""
    beta = tuple(int(e) for e in exponents)
    if any(e < 0 for e in beta):
        raise ValueError(f"negative exponent in {beta}")
    return beta


def _check_degree(degree: int, cap: int) -> None:
    if degree > cap:
        raise CapacityError(f"degree {degree} exceeds cap {cap}")


@dataclass(frozen=True)
class HermitePoly:
    """Immutable sparse polynomial.

    ``terms`` is a tuple of ``(multi_index, coefficient)`` pairs sorted by
    multi-index with no exactly-zero coefficient. Use :meth:`from_dict` to
    build one from an arbitrary mapping.
    """

    dim: int
    terms: tuple
    basis: str = "hermite"

    def __post_init__(self):
        if self.basis not in BASES:
            raise ValueError(f"unknown basis {self.basis!r}")
        if self.dim < 0:
            raise ValueError("dimension must be non-negative")
        for beta, _ in self.terms:
            if len(beta) != self.dim:
                raise ValueError(f"multi-index {beta} does not match dim {self.dim}")

    @classmethod
    def from_dict(cls, dim: int, coeffs: Mapping, basis: str = "hermite") -> "HermitePoly":
        merged: dict = {}
        for beta, c in coeffs.items():
            beta = multi_index(beta)
            merged[beta] = merged.get(beta, 0) + complex(c)
        terms = tuple(sorted((b, c) for b, c in merged.items() if c != 0))
        return cls(dim, terms, basis)

    @classmethod
    def constant(cls, dim: int, value: Scalar = 1.0, basis: str = "hermite") -> "HermitePoly":
        return cls.from_dict(dim, {(0,) * dim: value}, basis)

    @property
    def coeffs(self) -> dict:
        return dict(self.terms)

    @property
    def degree(self) -> int:
        return max((sum(b) for b, _ in self.terms), default=0)

    @property
    def is_real(self) -> bool:
        return all(complex(c).imag == 0 for _, c in self.terms)

    def with_basis(self, basis: str) -> "HermitePoly":
        return to_hermite(self) if basis == "hermite" else to_monomial(self)

    def conj(self) -> "HermitePoly":
        """Coefficient-wise conjugate; equals the pointwise conjugate on real inputs."""
        return HermitePoly(self.dim, tuple((b, complex(c).conjugate()) for b, c in self.terms), self.basis)

    def scale(self, factor: Scalar) -> "HermitePoly":
        return HermitePoly.from_dict(self.dim, {b: factor * c for b, c in self.terms}, self.basis)

    def __add__(self, other: "HermitePoly") -> "HermitePoly":
        other = other.with_basis(self.basis)
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        acc = self.coeffs
        for b, c in other.terms:
            acc[b] = acc.get(b, 0) + c
        return HermitePoly.from_dict(self.dim, acc, self.basis)

    def __call__(self, x) -> np.ndarray:
        return evaluate_many(self, x)


def _univariate_smoothing(n: int, variance: complex) -> list:
    """Coefficients of ``E (y + sqrt(v) eta)**n`` as ``[(power_of_y, coeff), ...]``."""
    out = []
    for k in range(n // 2 + 1):
        c = math.comb(n, 2 * k) * _double_factorial(2 * k - 1) * variance**k
        if c != 0:
            out.append((n - 2 * k, c))
    return out


def _double_factorial(m: int) -> int:
    return math.prod(range(m, 0, -2)) if m > 0 else 1


def _smooth_terms(terms, dim: int, variances: Sequence[complex]) -> dict:
    acc: dict = {}
    tables: dict = {}
    for beta, c in terms:
        parts = []
        for i, e in enumerate(beta):
            key = (e, variances[i])
            if key not in tables:
                tables[key] = _univariate_smoothing(e, variances[i])
            parts.append(tables[key])
        for combo in itertools.product(*parts):
            gamma = tuple(e for e, _ in combo)
            acc[gamma] = acc.get(gamma, 0) + c * math.prod(w for _, w in combo)
    return acc


def _prune(acc: dict, rel: float = 1e-14) -> dict:
    """Drop cancellation residue far below the largest coefficient."""
    if not acc:
        return acc
    top = max(abs(c) for c in acc.values())
    return {b: c for b, c in acc.items() if abs(c) > rel * top}


def heat_smooth(f: HermitePoly, variance) -> HermitePoly:
    """Return the monomial polynomial ``y -> E f(y + sqrt(variance) * eta)``.

    ``variance`` may be a scalar or one value per coordinate and may be complex
    or negative; the expectation is understood through Gaussian moments
    ``E eta**(2k) = (2k-1)!!``, which is exact for polynomials.
    """
    f = to_monomial(f)
    v = np.broadcast_to(np.asarray(variance, dtype=complex), (f.dim,))
    acc = _smooth_terms(f.terms, f.dim, [complex(x) for x in v])
    return HermitePoly.from_dict(f.dim, _prune(acc), "monomial")


def to_monomial(f: HermitePoly) -> HermitePoly:
    if f.basis == "monomial":
        return f
    acc = _smooth_terms(f.terms, f.dim, [-1.0] * f.dim)
    return HermitePoly.from_dict(f.dim, _prune(acc), "monomial")


def to_hermite(f: HermitePoly) -> HermitePoly:
    if f.basis == "hermite":
        return f
    acc = _smooth_terms(f.terms, f.dim, [1.0] * f.dim)
    return HermitePoly.from_dict(f.dim, _prune(acc), "hermite")


def hermite_basis(beta: Sequence[int], cap: int = DEGREE_CAP) -> HermitePoly:
    """Monomial expansion of ``H_beta``."""
    beta = multi_index(beta)
    _check_degree(sum(beta), cap)
    return to_monomial(HermitePoly(len(beta), ((beta, 1.0 + 0j),), "hermite"))


@functools.lru_cache(maxsize=512)
def _term_arrays(f: HermitePoly):
    m = to_monomial(f)
    if not m.terms:
        return np.zeros((0, m.dim), dtype=int), np.zeros(0, dtype=complex)
    exps = np.array([b for b, _ in m.terms], dtype=int).reshape(len(m.terms), m.dim)
    coeffs = np.array([c for _, c in m.terms], dtype=complex)
    return exps, coeffs


def evaluate_many(f: HermitePoly, x) -> np.ndarray:
    """Evaluate ``f`` at each row of ``x`` and return a complex array.

    ``x`` has shape ``(N, dim)``; a flat array is read as ``N`` points when
    ``dim == 1`` and as a single point otherwise. Inputs may be complex.
    """
    x = np.asarray(x)
    if x.ndim == 1:
        x = x.reshape(-1, 1) if f.dim == 1 else x.reshape(1, -1)
    pts = x.astype(complex if np.iscomplexobj(x) else float)
    if pts.shape[1] != f.dim:
        raise ValueError(f"expected points of dimension {f.dim}, got {pts.shape[1]}")
    exps, coeffs = _term_arrays(f)
    out = np.zeros(pts.shape[0], dtype=complex)
    if len(coeffs):
        top = int(exps.max()) if exps.size else 0
        powers = [np.ones_like(pts)]
        for _ in range(top):
            powers.append(powers[-1] * pts)
        for beta, c in zip(exps, coeffs):
            term = np.full(pts.shape[0], c, dtype=complex)
            for i, e in enumerate(beta):
                if e:
                    term = term * powers[e][:, i]
            out += term
    return out


def evaluate(f: HermitePoly, x) -> complex:
    """Evaluate ``f`` at a single (possibly complex) point."""
    return complex(evaluate_many(f, np.asarray(x).reshape(1, f.dim))[0])


def multiply(f: HermitePoly, g: HermitePoly, cap: int = DEGREE_CAP) -> HermitePoly:
    """Product of two polynomials, returned in the monomial basis."""
    if f.dim != g.dim:
        raise ValueError("dimension mismatch")
    _check_degree(f.degree + g.degree, cap)
    a, b = to_monomial(f), to_monomial(g)
    acc: dict = {}
    for ba, ca in a.terms:
        for bb, cb in b.terms:
            key = tuple(i + j for i, j in zip(ba, bb))
            acc[key] = acc.get(key, 0) + ca * cb
    return HermitePoly.from_dict(f.dim, acc, "monomial")


def ou_generator(f: HermitePoly) -> HermitePoly:
    """Apply ``L = Laplacian - x . grad``; returns the Hermite-basis result."""
    h = to_hermite(f)
    return HermitePoly.from_dict(h.dim, {b: -sum(b) * c for b, c in h.terms}, "hermite")


def ou_generator_monomial(f: HermitePoly) -> HermitePoly:
    """``L f`` computed from derivatives in the monomial basis.

    ``L x^b = sum_i b_i (b_i - 1) x^(b - 2 e_i) - |b| x^b``; this route does not
    use the Hermite expansion and serves as a cross-check of :func:`ou_generator`.
    """
    m = to_monomial(f)
    acc: dict = {}
    for beta, c in m.terms:
        acc[beta] = acc.get(beta, 0) - sum(beta) * c
        for i, e in enumerate(beta):
            if e >= 2:
                key = beta[:i] + (e - 2,) + beta[i + 1:]
                acc[key] = acc.get(key, 0) + e * (e - 1) * c
    return HermitePoly.from_dict(m.dim, acc, "monomial")


def scale_arguments(f: HermitePoly, factor) -> HermitePoly:
    """Monomial polynomial ``x -> f(factor * x)`` (scalar or per-coordinate factor)."""
    m = to_monomial(f)
    w = np.broadcast_to(np.asarray(factor, dtype=complex), (m.dim,))
    return HermitePoly.from_dict(
        m.dim, {b: c * np.prod(w**np.array(b)) for b, c in m.terms}, "monomial"
    )


def embed(f: HermitePoly, offset: int, total_dim: int) -> HermitePoly:
    """Re-index ``f`` onto coordinates ``offset .. offset+dim`` of ``total_dim``."""
    pad = total_dim - offset - f.dim
    if offset < 0 or pad < 0:
        raise ValueError("block does not fit")
    return HermitePoly(
        total_dim,
        tuple(((0,) * offset + b + (0,) * pad, c) for b, c in f.terms),
        f.basis,
    )


def allclose(f: HermitePoly, g: HermitePoly, rtol: float = 1e-12) -> bool:
    """Compare coefficient maps (missing keys count as zero) in ``f``'s basis."""
    g = g.with_basis(f.basis)
    a, b = f.coeffs, g.coeffs
    top = max([abs(c) for c in a.values()] + [abs(c) for c in b.values()] + [0.0])
    return all(abs(a.get(k, 0) - b.get(k, 0)) <= rtol * max(top, 1.0) for k in set(a) | set(b))


def random_poly(rng: np.random.Generator, dim: int, degree: int, basis: str = "hermite",
                complex_coeffs: bool = True) -> HermitePoly:
    """Dense random polynomial with standard normal coefficients."""
    coeffs = {}
    for beta in itertools.product(range(degree + 1), repeat=dim):
        if sum(beta) <= degree:
            c = rng.standard_normal()
            if complex_coeffs:
                c = c + 1j * rng.standard_normal()
            coeffs[beta] = c
    return HermitePoly.from_dict(dim, coeffs, basis)


def dumps(f: HermitePoly) -> str:
    """Serialize to the line-oriented text format."""
    lines = [f"dim={f.dim} basis={f.basis}"]
    for beta, c in f.terms:
        c = complex(c)
        lines.append(f"{c.real!r} {c.imag!r} : " + " ".join(str(e) for e in beta))
    return "\n".join(lines) + "\n"


def loads(text: str) -> HermitePoly:
    """Parse the text format written by :func:`dumps`."""
    rows = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not rows:
        raise ValueError("empty polynomial text")
    header = dict(tok.split("=", 1) for tok in rows[0].split())
    dim, basis = int(header["dim"]), header.get("basis", "hermite")
    coeffs = {}
    for ln in rows[1:]:
        left, _, right = ln.partition(":")
        re_, im_ = (float(t) for t in left.split())
        beta = multi_index(int(t) for t in right.split())
        if len(beta) != dim:
            raise ValueError(f"line {ln!r} has {len(beta)} exponents, expected {dim}")
        coeffs[beta] = coeffs.get(beta, 0) + complex(re_, im_)
    return HermitePoly.from_dict(dim, coeffs, basis)
