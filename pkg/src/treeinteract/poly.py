"""Polynomial arithmetic in multipoint interpolation form.

A polynomial is represented by its values at a fixed set of base points
instead of by its coefficients.  Multiplication and division of polynomials
then become elementwise operations on the value vectors, and the weighted
coefficient sums needed by Shapley-style attributions become inner products
with precomputed vectors (a Vandermonde solve per degree).

Base points are Chebyshev points of the first kind,

    y_k = cos((2k + 1) * pi / (2 (d + 1))),   k = 0..d,

which lie strictly inside (-1, 1).  That keeps the recurring (1 + y) factors
bounded away from zero, and odd degrees additionally exclude y = 0, which the
traversal engine relies on (see ``engine``).

Degrees here are tiny (at most the number of distinct features along a tree
path), so dense linear algebra per degree is perfectly adequate.  Supported
degree is capped at ``MAX_DEGREE``; conditioning of the Vandermonde solves
degrades slowly and results past degree ~30 lose a few digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np

from .errors import ConfigError, SingularPointError

MAX_DEGREE = 64

#: Named cardinal-interaction weight families.  A custom family is any
#: callable ``w(s, t)`` returning the weight for interaction order ``s`` and
#: context-coalition size ``t``.
SII = "sii"
BANZHAF = "banzhaf"

CIIKind = Union[str, Callable[[int, int], float]]


def chebyshev_points(d: int) -> np.ndarray:
    """Chebyshev points of the first kind for degree ``d`` (``d + 1`` points)."""
    if d < 0:
        raise ConfigError(f"degree must be nonnegative, got {d}")
    if d > MAX_DEGREE:
        raise ConfigError(f"degree {d} exceeds supported maximum {MAX_DEGREE}")
    k = np.arange(d + 1)
    return np.cos((2 * k + 1) * np.pi / (2 * (d + 1)))


@dataclass
class InterpPoly:
    """A polynomial stored as its values at the base points of one grid degree.

    ``degree`` is the *nominal* degree used to select weighting vectors; the
    storage grid (``len(evals) - 1``) may be larger, e.g. after a division the
    quotient keeps its grid but its nominal degree drops by the divisor's.
    """

    degree: int
    evals: np.ndarray

    def __post_init__(self) -> None:
        self.evals = np.asarray(self.evals, dtype=float)
        if self.evals.ndim != 1:
            raise ConfigError("evals must be a one-dimensional vector")
        if self.degree < 0 or self.degree > self.storage_degree:
            raise ConfigError(
                f"nominal degree {self.degree} outside storage grid of degree {self.storage_degree}"
            )
        if not np.isfinite(self.evals).all():
            raise ConfigError("polynomial evaluations must be finite")

    @property
    def storage_degree(self) -> int:
        return len(self.evals) - 1


class ChebyshevGrid:
    """Per-degree base points plus cached (1 + y)^k vectors and barycentric weights."""

    def __init__(self, max_degree: int):
        if not 0 <= max_degree <= MAX_DEGREE:
            raise ConfigError(f"max_degree must be in [0, {MAX_DEGREE}], got {max_degree}")
        self.max_degree = max_degree
        self.points = [chebyshev_points(d) for d in range(max_degree + 1)]
        self._pow_cache: dict[tuple[int, int], np.ndarray] = {}
        self._bary_cache: dict[int, np.ndarray] = {}

    def one_plus_y_power(self, d: int, k: int) -> np.ndarray:
        """Elementwise (1 + y)^k on the degree-``d`` point set."""
        key = (d, k)
        out = self._pow_cache.get(key)
        if out is None:
            out = (1.0 + self.points[d]) ** k
            out.setflags(write=False)
            self._pow_cache[key] = out
        return out

    def one_plus_matrix(self, d: int) -> np.ndarray:
        """Matrix whose row k is (1 + y)^k on the degree-``d`` point set."""
        key = (d, -1)
        out = self._pow_cache.get(key)
        if out is None:
            out = np.vstack([self.one_plus_y_power(d, k) for k in range(d + 1)])
            out.setflags(write=False)
            self._pow_cache[key] = out
        return out

    def barycentric_weights(self, d: int) -> np.ndarray:
        out = self._bary_cache.get(d)
        if out is None:
            y = self.points[d]
            out = np.ones(d + 1)
            for j in range(d + 1):
                out[j] = 1.0 / np.prod(y[j] - np.delete(y, j)) if d > 0 else 1.0
            out /= np.max(np.abs(out))
            out.setflags(write=False)
            self._bary_cache[d] = out
        return out

    def reevaluate(self, p: InterpPoly, target_degree: int) -> np.ndarray:
        """Values of ``p`` on the degree-``target_degree`` point set.

        Barycentric interpolation from p's own storage grid; exact because the
        storage grid always over-determines the polynomial.
        """
        src_d = p.storage_degree
        if target_degree == src_d:
            return p.evals.copy()
        ys = self.points[src_d]
        w = self.barycentric_weights(src_d)
        t = self.points[target_degree]
        diff = t[:, None] - ys[None, :]  # (targets, sources)
        out = np.empty(target_degree + 1)
        exact = np.abs(diff) < 1e-14
        for i in range(target_degree + 1):
            hit = np.nonzero(exact[i])[0]
            if hit.size:
                out[i] = p.evals[hit[0]]
            else:
                ratios = w / diff[i]
                out[i] = ratios.dot(p.evals) / ratios.sum()
        return out


def evaluate_coeffs(coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Horner evaluation of a coefficient vector (lowest order first)."""
    out = np.zeros_like(points, dtype=float)
    for c in reversed(np.asarray(coeffs, dtype=float)):
        out = out * points + c
    return out


def to_interp(coeffs, grid: ChebyshevGrid, storage_degree: int | None = None) -> InterpPoly:
    """Convert a coefficient vector (lowest order first) to interpolation form.

    ``storage_degree`` optionally places the polynomial on a larger grid than
    its nominal degree, which callers need before multiplying.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim != 1 or coeffs.size == 0:
        raise ConfigError("coefficient vector must be nonempty and one-dimensional")
    if not np.isfinite(coeffs).all():
        raise ConfigError("coefficients must be finite")
    degree = coeffs.size - 1
    storage = degree if storage_degree is None else storage_degree
    if storage < degree:
        raise ConfigError("storage grid smaller than polynomial degree")
    if storage > grid.max_degree:
        raise ConfigError(f"degree {storage} exceeds grid max_degree {grid.max_degree}")
    return InterpPoly(degree, evaluate_coeffs(coeffs, grid.points[storage]))


def to_coeffs(p: InterpPoly, grid: ChebyshevGrid) -> np.ndarray:
    """Recover coefficients via a Vandermonde solve on the storage grid."""
    y = grid.points[p.storage_degree]
    vander = np.vander(y, increasing=True)
    return np.linalg.solve(vander, p.evals)[: p.degree + 1]


def _require_same_grid(a: InterpPoly, b: InterpPoly) -> None:
    if a.storage_degree != b.storage_degree:
        raise ConfigError(
            f"operands live on different grids ({a.storage_degree} vs {b.storage_degree})"
        )


def interp_mul(a: InterpPoly, b: InterpPoly) -> InterpPoly:
    """Elementwise product; nominal degrees add and must fit the shared grid."""
    _require_same_grid(a, b)
    degree = a.degree + b.degree
    if degree > a.storage_degree:
        raise ConfigError(
            f"product degree {degree} exceeds storage grid degree {a.storage_degree}"
        )
    return InterpPoly(degree, a.evals * b.evals)


def interp_div(a: InterpPoly, b: InterpPoly) -> InterpPoly:
    """Elementwise quotient.  The caller guarantees exact divisibility.

    A divisor value of exactly zero means a base point collided with a root of
    the divisor; that is a configuration error (the engine arranges its grids
    so it cannot happen) and raises ``SingularPointError`` rather than
    silently producing garbage.
    """
    _require_same_grid(a, b)
    if b.degree > a.degree:
        raise ConfigError("divisor degree exceeds dividend degree")
    if np.any(np.abs(b.evals) < 1e-300):
        raise SingularPointError("division by a zero evaluation at a base point")
    return InterpPoly(a.degree - b.degree, a.evals / b.evals)


def oplus(g1: InterpPoly, g2: InterpPoly, grid: ChebyshevGrid) -> InterpPoly:
    """Degree-aligning sum: the lower-degree operand is promoted with (1+y) factors.

    Result degree is max(d1, d2); on that grid the result equals
    g_high + g_low * (1 + y)^(d_high - d_low).
    """
    if g2.degree > g1.degree:
        g1, g2 = g2, g1
    d = g1.degree
    e1 = g1.evals if g1.storage_degree == d else grid.reevaluate(g1, d)
    e2 = g2.evals if g2.storage_degree == d else grid.reevaluate(g2, d)
    return InterpPoly(d, e1 + e2 * grid.one_plus_y_power(d, d - g2.degree))


def cii_weight(kind: CIIKind, n: int, s: int, t: int) -> float:
    """Context weight w(t) of a cardinal interaction index.

    For the Shapley interaction family this is 1 / ((n-s+1) * C(n-s, t)); the
    Banzhaf family uses the flat 2^-(n-s).  Custom kinds are callables (s, t).
    """
    if not 1 <= s <= n:
        raise ConfigError(f"interaction order {s} out of range for n={n}")
    if not 0 <= t <= n - s:
        raise ConfigError(f"coalition size {t} out of range 0..{n - s}")
    if kind == SII:
        return 1.0 / ((n - s + 1) * math.comb(n - s, t))
    if kind == BANZHAF:
        return 0.5 ** (n - s)
    if callable(kind):
        return float(kind(s, t))
    raise ConfigError(f"unknown CII kind {kind!r}")


def _cii_coeffs(kind: CIIKind, n: int, s: int) -> np.ndarray:
    d = n - s
    return np.array([cii_weight(kind, n, s, t) for t in range(d + 1)])


def _solve_weight_vector(points: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Vector u with <p(points), u> = <coefficients(p), coeffs> for deg(p) < len(points).

    ``coeffs`` is zero-padded to the grid size, so polynomials of lower true
    degree are weighted correctly as well.
    """
    size = len(points)
    padded = np.zeros(size)
    padded[: len(coeffs)] = coeffs
    vander = np.vander(points, increasing=True)
    return np.linalg.solve(vander.T, padded)


class WeightTables:
    """Precomputed inner-product vectors for the coefficient functionals.

    ``psi_vectors[d]`` weights coefficients by 1 / ((d+1) * C(d, k)) — the
    Shapley weighting.  ``kappa_vectors[d]`` weights them by 1 (coefficient
    sum, equal to evaluating the polynomial at 1).  Padded variants weight a
    nominal degree ``d`` polynomial stored on a larger grid; they are what the
    traversal engine consumes.
    """

    def __init__(self, grid: ChebyshevGrid):
        self.grid = grid
        self.max_degree = grid.max_degree
        self.psi_vectors: list[np.ndarray] = []
        self.kappa_vectors: list[np.ndarray] = []
        for d in range(self.max_degree + 1):
            pts = grid.points[d]
            b_coeffs = np.array([cii_weight(SII, d + 1, 1, k) for k in range(d + 1)])
            self.psi_vectors.append(_solve_weight_vector(pts, b_coeffs))
            self.kappa_vectors.append(_solve_weight_vector(pts, np.ones(d + 1)))
        self._psi_padded: dict[tuple[int, int], np.ndarray] = {}
        self._cii_cache: dict[tuple, np.ndarray] = {}

    def _check_degree(self, d: int) -> None:
        if not 0 <= d <= self.max_degree:
            raise ConfigError(f"degree {d} not covered by tables (max {self.max_degree})")

    def psi_padded(self, storage_degree: int, degree: int) -> np.ndarray:
        """Shapley weighting of a nominal-``degree`` polynomial stored on a larger grid."""
        self._check_degree(storage_degree)
        self._check_degree(degree)
        if storage_degree == degree:
            return self.psi_vectors[degree]
        key = (storage_degree, degree)
        out = self._psi_padded.get(key)
        if out is None:
            b_coeffs = np.array(
                [cii_weight(SII, degree + 1, 1, k) for k in range(degree + 1)]
            )
            out = _solve_weight_vector(self.grid.points[storage_degree], b_coeffs)
            self._cache_readonly(out)
            self._psi_padded[key] = out
        return out

    def kappa_padded(self, storage_degree: int) -> np.ndarray:
        """Coefficient-sum weighting; valid for any polynomial on that grid."""
        self._check_degree(storage_degree)
        return self.kappa_vectors[storage_degree]

    def cii_padded(self, kind: CIIKind, n: int, s: int, storage_degree: int) -> np.ndarray:
        """CII weighting for value vectors of the scaled path polynomial quotient.

        The traversal keeps the path polynomial at fixed true degree
        ``storage_degree`` (>= n), i.e. scaled by (1 + y)^(storage_degree - n).
        The extra factors are folded into the weight coefficients by a backward
        substitution, so the inner product still reproduces the degree-(n - s)
        CII weighting.
        """
        self._check_degree(storage_degree)
        m = storage_degree - n
        if m < 0:
            raise ConfigError(f"grid degree {storage_degree} below feature count {n}")
        key = (kind if isinstance(kind, str) else id(kind), n, s, storage_degree)
        out = self._cii_cache.get(key)
        if out is None:
            w = _cii_coeffs(kind, n, s)
            t = np.zeros(storage_degree - s + 1)
            for i in range(n - s, -1, -1):
                acc = w[i]
                for j in range(1, m + 1):
                    acc -= math.comb(m, j) * t[i + j]
                t[i] = acc
            out = _solve_weight_vector(self.grid.points[storage_degree], t)
            self._cache_readonly(out)
            self._cii_cache[key] = out
        return out

    @staticmethod
    def _cache_readonly(arr: np.ndarray) -> None:
        arr.setflags(write=False)


def psi(p: InterpPoly, tables: WeightTables) -> float:
    """Shapley-weighted coefficient sum of ``p`` at its nominal degree."""
    return float(p.evals.dot(tables.psi_padded(p.storage_degree, p.degree)))


def kappa(p: InterpPoly, tables: WeightTables) -> float:
    """Sum of the coefficients of ``p``; equals p(1)."""
    tables._check_degree(p.degree)
    return float(p.evals.dot(tables.kappa_padded(p.storage_degree)))


def cii_weight_table(kind: CIIKind, n: int, s: int, grid: ChebyshevGrid) -> np.ndarray:
    """Inner-product vector for the degree-(n-s) CII weight polynomial."""
    d = n - s
    if d > grid.max_degree:
        raise ConfigError(f"degree {d} exceeds grid max_degree {grid.max_degree}")
    return _solve_weight_vector(grid.points[d], _cii_coeffs(kind, n, s))


@lru_cache(maxsize=None)
def shared_grid(max_degree: int) -> ChebyshevGrid:
    """Process-wide grid instances; immutable, safe to share across workers."""
    return ChebyshevGrid(max_degree)


@lru_cache(maxsize=None)
def shared_tables(max_degree: int) -> WeightTables:
    """Process-wide weight tables over :func:`shared_grid`."""
    return WeightTables(shared_grid(max_degree))
