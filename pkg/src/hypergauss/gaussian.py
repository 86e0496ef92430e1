"""Expectations under a block-structured Gaussian vector.

A :class:`BlockCovariance` describes ``xi = (xi_1, ..., xi_n)`` with each
``xi_j`` standard normal in ``R^{k_j}`` and arbitrary cross-covariances.
Expectations are available exactly (Wick/Isserlis for polynomials), by tensor
Gauss-Hermite quadrature, by piecewise Gauss-Legendre for integrands with
kinks, and by Monte Carlo with counter-based seeding.
"""

from __future__ import annotations

import functools
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import ndtri

from .hermite import DEGREE_CAP, CapacityError, HermitePoly, embed, multiply, to_monomial

QUADRATURE_MAX_DIM = 6
QUADRATURE_MAX_NODES = 10**7
MC_BATCH = 1 << 16


class CovarianceError(ValueError):
    """Raised when a covariance matrix is not a valid block covariance."""


class QuadratureBudgetError(RuntimeError):
    """Signals that tensor quadrature is too large and MC should be used."""


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Stops when the off-diagonal Frobenius norm drops below ``tol * ||a||_F``.
    Returns ascending eigenvalues and the matching column eigenvectors.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(a, a.T, atol=1e-12 * max(1.0, np.abs(a).max(initial=0.0))):
        raise ValueError("matrix must be symmetric")
    a = (a + a.T) / 2
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = math.sqrt(2 * np.sum(np.triu(a, 1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-30 * scale:
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = (a[q, q] - a[p, p]) / (2 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p], a[:, q] = c * ap - s * aq, s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :], a[q, :] = c * ap - s * aq, s * ap + c * aq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


@dataclass(frozen=True, eq=False)
class BlockCovariance:
    """Covariance of ``n`` stacked standard normal blocks of sizes ``block_sizes``."""

    block_sizes: tuple
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "block_sizes", tuple(int(k) for k in self.block_sizes))
        object.__setattr__(self, "matrix", np.array(self.matrix, dtype=float))
        self.validate()

    @classmethod
    def equicorrelated(cls, n: int, rho: float) -> "BlockCovariance":
        """``n`` scalar blocks with pairwise correlation ``rho``."""
        m = np.full((n, n), float(rho))
        np.fill_diagonal(m, 1.0)
        return cls((1,) * n, m)

    @classmethod
    def identity(cls, block_sizes: Sequence[int]) -> "BlockCovariance":
        return cls(tuple(block_sizes), np.eye(sum(block_sizes)))

    @classmethod
    def random(cls, rng: np.random.Generator, block_sizes: Sequence[int],
               mixing: float = 0.6) -> "BlockCovariance":
        """Random covariance with identity diagonal blocks.

        ``mixing`` in ``[0, 1)`` interpolates between independence and a
        normalized random Gram matrix, which keeps the spectrum away from 0.
        """
        sizes = tuple(block_sizes)
        k = sum(sizes)
        g = rng.standard_normal((k, k + 2))
        c = g @ g.T
        d = np.zeros((k, k))
        for sl in _slices(sizes):
            w, u = np.linalg.eigh(c[sl, sl])
            d[sl, sl] = u @ np.diag(w**-0.5) @ u.T
        corr = d @ c @ d
        m = (1 - mixing) * np.eye(k) + mixing * corr
        return cls(sizes, (m + m.T) / 2)

    @property
    def K(self) -> int:
        return sum(self.block_sizes)

    @property
    def n(self) -> int:
        return len(self.block_sizes)

    @property
    def slices(self) -> list:
        return _slices(self.block_sizes)

    def block(self, i: int, j: int) -> np.ndarray:
        return self.matrix[self.slices[i], self.slices[j]]

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return jacobi_eigh(self.matrix)[0]

    @property
    def lam_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lam_max(self) -> float:
        return float(self.eigenvalues[-1])

    def validate(self) -> None:
        m = self.matrix
        if m.shape != (self.K, self.K):
            raise CovarianceError(f"matrix shape {m.shape} does not match blocks {self.block_sizes}")
        if not np.allclose(m, m.T, atol=1e-12):
            raise CovarianceError("matrix is not symmetric")
        for j, sl in enumerate(self.slices):
            dev = np.abs(m[sl, sl] - np.eye(self.block_sizes[j])).max()
            if dev > 1e-12:
                raise CovarianceError(f"diagonal block {j} deviates from identity by {dev:.3g}")
        if self.lam_min <= 1e-10:
            raise CovarianceError(f"smallest eigenvalue {self.lam_min:.3g} is not positive")

    @cached_property
    def factor(self) -> np.ndarray:
        """Lower Cholesky factor ``A`` with ``A A^T = matrix``."""
        return np.linalg.cholesky(self.matrix)

    @property
    def block_factors(self) -> list:
        """Block rows ``A_j`` of the factor; each satisfies ``A_j A_j^T = I``."""
        a = self.factor
        return [a[sl, :] for sl in self.slices]


def _slices(sizes: Sequence[int]) -> list:
    offs = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    return [slice(int(offs[i]), int(offs[i + 1])) for i in range(len(sizes))]


class WickEngine:
    """Memoized Gaussian moments ``E prod_i x_i**gamma_i`` for a fixed covariance."""

    def __init__(self, matrix: np.ndarray):
        self.matrix = np.asarray(matrix, dtype=float)
        self._memo: dict = {}

    def moment(self, gamma: Sequence[int]) -> float:
        gamma = tuple(int(g) for g in gamma)
        if len(gamma) != self.matrix.shape[0]:
            raise ValueError("multi-index length does not match covariance")
        if sum(gamma) > DEGREE_CAP:
            raise CapacityError(f"moment of degree {sum(gamma)} exceeds cap {DEGREE_CAP}")
        return self._moment(gamma)

    def _moment(self, counts: tuple) -> float:
        total = sum(counts)
        if total == 0:
            return 1.0
        if total % 2:
            return 0.0
        hit = self._memo.get(counts)
        if hit is not None:
            return hit
        i = next(idx for idx, c in enumerate(counts) if c)
        rest = list(counts)
        rest[i] -= 1
        acc = 0.0
        for j, c in enumerate(rest):
            if c and self.matrix[i, j] != 0.0:
                nxt = rest.copy()
                nxt[j] -= 1
                acc += c * self.matrix[i, j] * self._moment(tuple(nxt))
        self._memo[counts] = acc
        return acc


def wick_moment(gamma: Sequence[int], cov) -> float:
    """``E prod_i x_i**gamma_i`` for ``x ~ N(0, cov)`` by Isserlis pairing."""
    matrix = cov.matrix if isinstance(cov, BlockCovariance) else cov
    return WickEngine(matrix).moment(gamma)


def expect_product_exact(polys: Sequence[HermitePoly], cov: BlockCovariance,
                         engine: WickEngine | None = None) -> complex:
    """Exact ``E prod_j f_j(xi_j)`` for polynomials, block ``j`` feeding ``f_j``."""
    if len(polys) != cov.n:
        raise ValueError("need one polynomial per block")
    engine = engine or WickEngine(cov.matrix)
    offsets = [sl.start for sl in cov.slices]
    prod = HermitePoly.constant(cov.K, 1.0, "monomial")
    for f, off, k in zip(polys, offsets, cov.block_sizes):
        if f.dim != k:
            raise ValueError(f"polynomial of dim {f.dim} on block of size {k}")
        prod = multiply(prod, embed(to_monomial(f), off, cov.K))
    return sum(c * engine.moment(b) for b, c in prod.terms)


@functools.lru_cache(maxsize=64)
def gauss_hermite(n: int):
    """Probabilists' Gauss-Hermite rule by Golub-Welsch; weights sum to one."""
    if n < 1:
        raise ValueError("need at least one node")
    if n == 1:
        return np.zeros(1), np.ones(1)
    nodes, vecs = eigh_tridiagonal(np.zeros(n), np.sqrt(np.arange(1, n, dtype=float)))
    weights = vecs[0, :] ** 2
    return nodes, weights / weights.sum()


def _tensor_chunks(nodes_1d, weights_1d, dim: int, chunk: int = 1 << 17):
    n = len(nodes_1d)
    total = n**dim
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        digits = np.empty((len(idx), dim), dtype=int)
        rem = idx
        for d in range(dim - 1, -1, -1):
            digits[:, d] = rem % n
            rem = rem // n
        yield nodes_1d[digits], np.prod(weights_1d[digits], axis=1)


def expect_quadrature(fn: Callable, cov: BlockCovariance, nodes_per_dim: int):
    """``E fn(xi)`` by tensor Gauss-Hermite in whitened coordinates.

    ``fn`` maps an ``(N, K)`` array to ``N`` values. Raises
    :class:`QuadratureBudgetError` when ``K > 6`` or the node count exceeds
    ``1e7``.
    """
    k = cov.K
    if k > QUADRATURE_MAX_DIM or nodes_per_dim**k > QUADRATURE_MAX_NODES:
        raise QuadratureBudgetError(f"{nodes_per_dim}^{k} nodes exceeds the quadrature budget")
    x1, w1 = gauss_hermite(nodes_per_dim)
    a = cov.factor
    acc = 0.0
    for g, w in _tensor_chunks(x1, w1, k):
        acc = acc + np.dot(w, fn(g @ a.T))
    return acc


def expect_quadrature_refined(fn: Callable, cov: BlockCovariance, nodes_per_dim: int):
    """Quadrature value at ``ceil(1.5 n)`` nodes and its gap to the ``n``-node value."""
    coarse = expect_quadrature(fn, cov, nodes_per_dim)
    fine = expect_quadrature(fn, cov, int(math.ceil(1.5 * nodes_per_dim)))
    return fine, abs(fine - coarse)


@functools.lru_cache(maxsize=16)
def _legendre(order: int):
    return np.polynomial.legendre.leggauss(order)


def _panels(breaks: Sequence[float], half_width: float, max_width: float, grading: int = 14):
    inner = [b for b in breaks if -half_width < b < half_width]
    # geometric refinement toward each kink keeps Gauss-Legendre spectrally accurate
    graded = [b + sgn * max_width * 0.5**k for b in inner for k in range(1, grading)
              for sgn in (-1.0, 1.0)]
    pts = sorted({-half_width, half_width, *inner,
                  *(g for g in graded if -half_width < g < half_width)})
    edges = []
    for lo, hi in zip(pts[:-1], pts[1:]):
        m = max(1, int(math.ceil((hi - lo) / max_width)))
        edges.extend(np.linspace(lo, hi, m + 1)[:-1])
    edges.append(pts[-1])
    return np.asarray(edges)


def _panel_rule(breaks, half_width: float, max_width: float, order: int):
    """Nodes and weights (density included) for ``int h(g) phi(g) dg``."""
    t, w = _legendre(order)
    edges = _panels(breaks, half_width, max_width)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = ((hi - lo) / 2 * t + (hi + lo) / 2).ravel()
    weights = ((hi - lo) / 2 * w).ravel() * np.exp(-nodes**2 / 2) / math.sqrt(2 * math.pi)
    return nodes, weights


def expect_piecewise(fn: Callable, cov: BlockCovariance, outer_breaks: Sequence[float] = (),
                     inner_breaks: Callable | None = None, half_width: float = 14.0,
                     max_width: float = 0.5, order: int = 20):
    """``E fn(xi)`` for ``K <= 2`` by panel Gauss-Legendre in whitened coordinates.

    Intended for integrands that are smooth except on known sets, such as
    ``|P|**p`` with ``P`` a polynomial. ``outer_breaks`` are kinks in the first
    whitened coordinate; ``inner_breaks(g1)`` returns kinks in the second.
    """
    k = cov.K
    a = cov.factor
    if k == 1:
        g, w = _panel_rule(outer_breaks, half_width, max_width, order)
        return np.dot(w, fn((g[:, None]) @ a.T))
    if k != 2:
        raise ValueError("piecewise integration supports at most two coordinates")
    g1, w1 = _panel_rule(outer_breaks, half_width, max_width, order)
    acc = 0.0
    for x, wx in zip(g1, w1):
        brk = inner_breaks(x) if inner_breaks is not None else ()
        g2, w2 = _panel_rule(brk, half_width, max_width, order)
        pts = np.column_stack([np.full_like(g2, x), g2])
        acc = acc + wx * np.dot(w2, fn(pts @ a.T))
    return acc


def standard_normals(seed: int, start: int, count: int, dim: int) -> np.ndarray:
    """Rows ``start .. start+count`` of a reproducible standard normal stream.

    Row ``i`` depends only on ``(seed, i)``: rows are grouped in fixed blocks
    of ``MC_BATCH`` and block ``b`` reads a Philox stream jumped ``b`` times.
    Uniforms are mapped through the inverse normal CDF.
    """
    out = np.empty((count, dim))
    pos = 0
    while pos < count:
        i = start + pos
        b, off = divmod(i, MC_BATCH)
        take = min(count - pos, MC_BATCH - off)
        bg = np.random.Philox(key=seed & ((1 << 64) - 1)).jumped(b)
        raw = bg.random_raw((off + take) * dim)[off * dim:]
        u = ((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53
        out[pos:pos + take] = ndtri(u).reshape(take, dim)
        pos += take
    return out


class MCEstimate(NamedTuple):
    estimate: complex
    stderr: float
    tainted: bool


def expect_mc(fn: Callable, cov: BlockCovariance, samples: int, seed: int,
              jobs: int = 1) -> MCEstimate:
    """Monte Carlo ``E fn(xi)`` with a standard error.

    Non-finite evaluations are dropped and flag the estimate as tainted. The
    result is independent of ``jobs``.
    """
    a = cov.factor
    starts = list(range(0, samples, MC_BATCH))

    def batch(start):
        g = standard_normals(seed, start, min(MC_BATCH, samples - start), cov.K)
        v = np.asarray(fn(g @ a.T))
        ok = np.isfinite(v)
        v = v[ok]
        return len(v), v.sum(), (v.real**2).sum() + (np.imag(v) ** 2).sum(), not ok.all()

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(batch, starts))
    else:
        parts = [batch(s) for s in starts]
    n = sum(p[0] for p in parts)
    if n == 0:
        return MCEstimate(float("nan"), float("inf"), True)
    mean = sum(p[1] for p in parts) / n
    second = sum(p[2] for p in parts) / n
    var = max(second - abs(mean) ** 2, 0.0) * n / max(n - 1, 1)
    return MCEstimate(mean, math.sqrt(var / n), any(p[3] for p in parts))


def tensor_grid(nodes_per_dim: int, dim: int):
    """Full tensor Gauss-Hermite grid (points, weights) for small dimensions."""
    x1, w1 = gauss_hermite(nodes_per_dim)
    pts = np.array(list(itertools.product(x1, repeat=dim))).reshape(-1, dim)
    wts = np.prod(np.array(list(itertools.product(w1, repeat=dim))).reshape(-1, dim), axis=1)
    return pts, wts
