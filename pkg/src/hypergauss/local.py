"""Local (pointwise matrix) conditions characterising the global inequalities.

Each checker builds a real symmetric matrix whose positive semidefiniteness
is the condition, and reports its smallest eigenvalue as the margin. Complex
vectors ``w`` are handled through the real coordinates ``(Re w, Im w)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gaussian import BlockCovariance
from .pairs import FunctionPair, InnerFunction
from .results import ConditionReport

GRID_RANDOM_POINTS = 200
GRID_TENSOR_LIMIT = 10_000


@dataclass(frozen=True)
class HyperParams:
    """Exponents ``p_j``, outer exponent ``alpha`` and per-block parameters.

    ``z`` holds complex Mehler parameters, ``r`` real noise parameters and
    ``s`` imaginary parts for the ``z = i s`` case; only the fields a checker
    needs must be set.
    """

    p: tuple
    alpha: float = 1.0
    z: tuple | None = None
    r: tuple | None = None
    s: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(float(x) for x in self.p))
        for name, cast in (("z", complex), ("r", float), ("s", float)):
            val = getattr(self, name)
            if val is not None:
                val = tuple(cast(x) for x in val)
                if len(val) != len(self.p):
                    raise ValueError(f"{name} needs one entry per block")
                object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return len(self.p)


def _expand(values: Sequence, cov: BlockCovariance) -> np.ndarray:
    return np.repeat(np.asarray(values), cov.block_sizes)


def _kron_blocks(coef: np.ndarray, cov: BlockCovariance) -> np.ndarray:
    """The ``K x K`` matrix with block ``(p, q)`` equal to ``coef[p, q] * cov_pq``."""
    return np.repeat(np.repeat(coef, cov.block_sizes, axis=0), cov.block_sizes, axis=1) * cov.matrix


def min_eigenpair(mat: np.ndarray, tie_tol: float = 1e-12):
    """Smallest eigenvalue and a canonical unit eigenvector.

    Among (numerically) repeated minimal eigenvalues the eigenvector with the
    lexicographically largest absolute coordinates wins; its sign is chosen
    so that the first non-negligible coordinate is positive.
    """
    mat = (mat + mat.T) / 2
    w, v = np.linalg.eigh(mat)
    tied = np.flatnonzero(w <= w[0] + tie_tol * (1 + abs(w[0])))
    cand = [v[:, i] for i in tied]
    best = max(cand, key=lambda x: tuple(np.round(np.abs(x), 12)))
    nz = np.flatnonzero(np.abs(best) > 1e-12)
    if len(nz) and best[nz[0]] < 0:
        best = -best
    return float(w[0]), best


def _to_complex(vec: np.ndarray, k: int) -> np.ndarray:
    return vec[:k] + 1j * vec[k:]


def _complex_quadratic_parts(z: np.ndarray):
    """Real 2K x K maps ``(a, b) -> Re w`` and ``(a, b) -> Re(z w)``."""
    k = len(z)
    re_map = np.hstack([np.eye(k), np.zeros((k, k))])
    rez_map = np.hstack([np.diag(z.real), -np.diag(z.imag)])
    return re_map, rez_map


def _re_of_weighted_square(c: np.ndarray) -> np.ndarray:
    """Matrix of ``(a, b) -> Re sum_i c_i w_i^2`` with ``w = a + i b``."""
    return np.block([[np.diag(c.real), -np.diag(c.imag)], [-np.diag(c.imag), -np.diag(c.real)]])


def complex_local_matrix(params: HyperParams, cov: BlockCovariance) -> np.ndarray:
    z = _expand(params.z, cov).astype(complex)
    p = _expand(params.p, cov)
    re_map, rez_map = _complex_quadratic_parts(z)
    form = re_map.T @ cov.matrix @ re_map - params.alpha * rez_map.T @ cov.matrix @ rez_map
    return form - _re_of_weighted_square((1 - z * z) / p)


def check_complex_local(params: HyperParams, cov: BlockCovariance) -> ConditionReport:
    """Positivity of ``sum Re w_i cov_ij Re w_j - alpha Re(z_i w_i) cov_ij Re(z_j w_j)
    - Re sum_j (1 - z_j^2) w_j.w_j / p_j`` over complex ``w``."""
    if params.z is None:
        raise ValueError("complex local condition needs z")
    mat = complex_local_matrix(params, cov)
    lam, vec = min_eigenpair(mat)
    ok = params.alpha >= 1 and all(p > 0 for p in params.p)
    return ConditionReport.from_margin(lam, _to_complex(vec, cov.K), np.abs(mat).max(),
                                       extra={"hypotheses_ok": ok})


def check_imaginary_sandwich(params: HyperParams, cov: BlockCovariance) -> ConditionReport:
    """``(1/alpha) diag((1+s^2)/(s^2 p)) >= cov >= diag((1+s^2)/p)`` for ``z = i s``.

    Coordinates with ``s_j = 0`` drop out of the upper bound.
    """
    if params.s is None:
        raise ValueError("sandwich condition needs s")
    s = _expand(params.s, cov)
    p = _expand(params.p, cov)
    lower = cov.matrix - np.diag((1 + s**2) / p)
    lam_lo, vec_lo = min_eigenpair(lower)
    active = np.flatnonzero(s != 0)
    lam_hi, vec_hi = math.inf, None
    if len(active):
        sa, pa = s[active], p[active]
        upper = np.diag((1 + sa**2) / (sa**2 * pa)) / params.alpha - cov.matrix[np.ix_(active, active)]
        lam_hi, v = min_eigenpair(upper)
        vec_hi = np.zeros(cov.K)
        vec_hi[active] = v
    if lam_lo <= lam_hi:
        lam, wit, side = lam_lo, vec_lo, "lower"
    else:
        lam, wit, side = lam_hi, vec_hi, "upper"
    return ConditionReport.from_margin(lam, wit, np.abs(cov.matrix).max() + np.abs((1 + s**2) / p).max(),
                                       extra={"binding_side": side, "lower_margin": lam_lo,
                                              "upper_margin": lam_hi if math.isfinite(lam_hi) else None})


def real_local_matrix(params: HyperParams, cov: BlockCovariance) -> np.ndarray:
    r = np.asarray(params.r)
    p = np.asarray(params.p)
    coef = 1 - params.alpha * np.outer(r, r)
    return _kron_blocks(coef, cov) - np.diag(_expand((1 - r**2) / p, cov))


def _check_alpha(alpha: float, direction: str) -> None:
    if direction == "forward" and not (alpha < 0 or alpha >= 1):
        raise ValueError("forward direction needs alpha < 0 or alpha >= 1")
    if direction == "reverse" and not (0 < alpha <= 1):
        raise ValueError("reverse direction needs 0 < alpha <= 1")
    if direction not in ("forward", "reverse"):
        raise ValueError(f"unknown direction {direction!r}")


def check_real_local(params: HyperParams, cov: BlockCovariance, direction: str = "forward") -> ConditionReport:
    """``diag((1 - r_j^2)/p_j) <= {(1 - alpha r_u r_v) cov_uv}`` (forward) or ``>=`` (reverse)."""
    if params.r is None:
        raise ValueError("real local condition needs r")
    _check_alpha(params.alpha, direction)
    mat = real_local_matrix(params, cov)
    oriented = mat if direction == "forward" else -mat
    lam, vec = min_eigenpair(oriented)
    return ConditionReport.from_margin(lam, vec, np.abs(mat).max(), extra={"direction": direction})


def correlated_r_bound(p: float, q: float, lam_min: float) -> float:
    """Largest ``|r|`` allowed for equal exponents: ``sqrt((p lam - 1)/(q lam - 1))``."""
    if p * lam_min < 1 or q * lam_min <= 1:
        raise ValueError("need p * lam_min >= 1 and q * lam_min > 1")
    return math.sqrt((p * lam_min - 1) / (q * lam_min - 1))


def check_correlated_r_bound(p: float, q: float, cov: BlockCovariance, r: float) -> ConditionReport:
    """``|r| <= sqrt((p lam_min - 1)/(q lam_min - 1))`` with witness the bottom eigenvector."""
    bound = correlated_r_bound(p, q, cov.lam_min)
    lam, vec = min_eigenpair(cov.matrix)
    return ConditionReport.from_margin(bound - abs(r), vec, 1.0, extra={"bound": bound})


def default_c_grid(B: InnerFunction, seed: int = 0, random_points: int = GRID_RANDOM_POINTS) -> np.ndarray:
    """Tensor grid of 9 points per axis plus seeded random interior points.

    The tensor part is skipped when it would exceed 10 000 points.
    """
    axes = B.grid_axes()
    parts = []
    if len(axes) ** B.n <= GRID_TENSOR_LIMIT:
        parts.append(np.array(list(itertools.product(axes, repeat=B.n)), dtype=float))
    parts.append(B.sample_domain(np.random.default_rng(seed), random_points))
    return np.vstack(parts)


def _rescaling(b: float, grad: np.ndarray, c: np.ndarray) -> np.ndarray | None:
    """Diagonal ``sqrt(B) / B_p``; ``None`` when ``B`` or some ``B_p`` is not positive."""
    if b <= 0 or np.any(grad <= 0):
        return None
    return math.sqrt(b) / grad


def _convexity(pair: FunctionPair, ts: np.ndarray, real: bool, concave: bool = False) -> bool:
    """Is ``(t, y) -> k(t) y^2`` convex (or concave) at the sampled ``t``?"""
    k, k1, k2 = pair.F.kappa(ts, real=real)
    sign = -1.0 if concave else 1.0
    for a, b, c in zip(np.atleast_1d(k * sign), np.atleast_1d(k1 * sign), np.atleast_1d(k2 * sign)):
        hess = np.array([[c, 2 * b], [2 * b, 2 * a]])
        if np.linalg.eigvalsh(hess)[0] < -1e-9 * (1 + np.abs(hess).max()):
            return False
    return True


def fb_complex_matrix(pair: FunctionPair, z: np.ndarray, cov: BlockCovariance, c: np.ndarray):
    b, g, h = pair.B.derivs(c)
    _, f1, f2 = pair.F.derivs(b)
    kappa = f2 / f1
    zz = _expand(z, cov).astype(complex)
    re_map, rez_map = _complex_quadratic_parts(zz)
    w_coef = _kron_blocks(h + kappa * np.outer(g, g), cov)
    b_coef = _kron_blocks(h, cov)
    mat = -rez_map.T @ w_coef @ rez_map + re_map.T @ b_coef @ re_map
    gk = _expand(g / c, cov)
    zr, zi = zz.real, zz.imag
    mat += np.block([[np.diag(-zi**2 * gk), np.diag(-zi * zr * gk)],
                     [np.diag(-zi * zr * gk), np.diag((1 - zr**2) * gk)]])
    return mat, b, g


def check_fb_complex_local(pair: FunctionPair, z: Sequence[complex], cov: BlockCovariance,
                           c_grid: np.ndarray | None = None) -> ConditionReport:
    """General complex local condition for ``F(E B(|q_1|, ..))``-type functionals.

    At every grid point the form is congruence-rescaled by
    ``diag(sqrt(B) / B_p)`` (when ``B`` and its gradient are positive),
    which leaves its sign unchanged and makes power-type pairs independent
    of the grid point. Both the rescaled and raw margins are reported.
    """
    z = np.asarray(z, dtype=complex)
    grid = default_c_grid(pair.B) if c_grid is None else np.atleast_2d(c_grid)
    best = None
    raw_min = math.inf
    ts = []
    for c in grid:
        mat, b, g = fb_complex_matrix(pair, z, cov, c)
        ts.append(b)
        raw_min = min(raw_min, min_eigenpair(mat)[0])
        d = _rescaling(b, g, c)
        if d is not None:
            dd = np.tile(_expand(d, cov), 2)
            mat = mat * np.outer(dd, dd)
        lam, vec = min_eigenpair(mat)
        if best is None or lam < best[0]:
            best = (lam, vec, c, np.abs(mat).max())
    lam, vec, c, scale = best
    conv = _convexity(pair, np.asarray(ts), real=False)
    hyp = bool(np.all(np.abs(z) <= 1 + 1e-12))
    return ConditionReport.from_margin(lam, _to_complex(vec, cov.K), scale, at=tuple(c), convexity_ok=conv,
                                       extra={"raw_margin": raw_min, "modulus_ok": hyp})


def fb_real_matrices(pair: FunctionPair, r: np.ndarray, cov: BlockCovariance, c: np.ndarray):
    """Raw form ``(1 - rr) F' B_pq - rr F'' B_p B_q``, the variant with ``F'`` as an
    outer factor, and the raw form divided by ``F'``."""
    b, g, h = pair.B.derivs(c)
    _, f1, f2 = pair.F.derivs(b)
    rr = np.outer(r, r)
    raw = (1 - rr) * f1 * h - rr * f2 * np.outer(g, g)
    outer = f1 * ((1 - rr) * h - rr * f2 * np.outer(g, g))
    normalized = (1 - rr) * h - rr * (f2 / f1) * np.outer(g, g)
    return (_kron_blocks(raw, cov), _kron_blocks(outer, cov), _kron_blocks(normalized, cov),
            float(np.sign(f1)), b, g)


def check_fb_real_local(pair: FunctionPair, r: Sequence[float], cov: BlockCovariance,
                        c_grid: np.ndarray | None = None, direction: str = "forward") -> ConditionReport:
    """General real local condition for noise-operator inequalities.

    ``margin`` is the smallest eigenvalue of ``sign(F') D N D`` over the grid,
    where ``N`` is the form divided by ``F'`` and ``D`` the positive rescaling
    ``sqrt(B) / B_p``; its sign matches the raw form. ``extra`` also
    carries the outer-factor margin. Forward requires ``F''/|F'| y^2`` convex
    and the reverse direction requires it concave.
    """
    r = np.asarray(r, dtype=float)
    grid = default_c_grid(pair.B) if c_grid is None else np.atleast_2d(c_grid)
    orient = 1.0 if direction == "forward" else -1.0
    best = None
    outer_min = raw_min = math.inf
    ts = []
    for c in grid:
        raw, outer, normalized, sgn, b, g = fb_real_matrices(pair, r, cov, c)
        ts.append(b)
        raw_min = min(raw_min, min_eigenpair(orient * raw)[0])
        outer_min = min(outer_min, min_eigenpair(orient * outer)[0])
        mat = orient * sgn * normalized
        d = _rescaling(b, g, c)
        if d is not None:
            dd = _expand(d, cov)
            mat = mat * np.outer(dd, dd)
        lam, vec = min_eigenpair(mat)
        if best is None or lam < best[0]:
            best = (lam, vec, c, np.abs(mat).max())
    lam, vec, c, scale = best
    conv = _convexity(pair, np.asarray(ts), real=True, concave=direction == "reverse")
    return ConditionReport.from_margin(lam, vec, scale, at=tuple(c), convexity_ok=conv,
                                       extra={"direction": direction, "raw_form_margin": raw_min,
                                              "outer_factor_margin": outer_min})


def check_gaussian_jensen(B: InnerFunction, r: Sequence[float], cov: BlockCovariance,
                          c_grid: np.ndarray | None = None) -> ConditionReport:
    """``{(1 - r_p r_q) B_pq(c) cov_pq} >= 0`` on the grid (``F`` the identity)."""
    r = np.asarray(r, dtype=float)
    grid = default_c_grid(B) if c_grid is None else np.atleast_2d(c_grid)
    best = None
    for c in grid:
        _, _, h = B.derivs(c)
        mat = _kron_blocks((1 - np.outer(r, r)) * h, cov)
        lam, vec = min_eigenpair(mat)
        if best is None or lam < best[0]:
            best = (lam, vec, c, np.abs(mat).max())
    lam, vec, c, scale = best
    return ConditionReport.from_margin(lam, vec, scale, at=tuple(c))
