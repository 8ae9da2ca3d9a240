"""Distribution functions, seeded random streams and small dense linear algebra.

The chi-square routines go through the regularized incomplete gamma function
(power series below ``a + 1``, Lentz continued fraction above).  The Bates
quantile is exact (Irwin-Hall) up to ``m = 12`` and uses the normal limit
beyond that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from statistics import NormalDist

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DomainError, RankError, SingularMatrixError

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000

BATES_EXACT_MAX_M = 12


# ---------------------------------------------------------------------------
# incomplete gamma / chi-square
# ---------------------------------------------------------------------------


def _gamma_p_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_contfrac(a: float, x: float) -> float:
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def regularized_gamma(a: float, x: float) -> tuple[float, float]:
    """Return ``(P(a, x), Q(a, x))``, the regularized lower and upper incomplete gamma."""
    if a <= 0:
        raise DomainError(f"shape must be positive, got {a}")
    if x < 0 or math.isnan(x):
        raise DomainError(f"x must be nonnegative, got {x}")
    if x == 0:
        return 0.0, 1.0
    if math.isinf(x):
        return 1.0, 0.0
    if x < a + 1.0:
        p = _gamma_p_series(a, x)
        return p, 1.0 - p
    q = _gamma_q_contfrac(a, x)
    return 1.0 - q, q


def _check_df(df: int) -> int:
    if int(df) != df or df < 1:
        raise DomainError(f"degrees of freedom must be a positive integer, got {df}")
    return int(df)


def chi_sq_cdf(x: float, df: int) -> float:
    """P[chi2_df <= x]."""
    df = _check_df(df)
    if x < 0:
        raise DomainError(f"chi-square argument must be nonnegative, got {x}")
    return regularized_gamma(0.5 * df, 0.5 * x)[0]


def chi_sq_sf(x: float, df: int) -> float:
    """Upper tail P[chi2_df > x], accurate far into the tail."""
    df = _check_df(df)
    if x < 0:
        raise DomainError(f"chi-square argument must be nonnegative, got {x}")
    return regularized_gamma(0.5 * df, 0.5 * x)[1]


def chi_sq_pdf(x: float, df: int) -> float:
    df = _check_df(df)
    if x <= 0:
        if df == 2 and x == 0:
            return 0.5
        return 0.0
    a = 0.5 * df
    return math.exp((a - 1.0) * math.log(x) - 0.5 * x - a * math.log(2.0) - math.lgamma(a))


def chi_sq_quantile(p: float, df: int) -> float:
    """Inverse of :func:`chi_sq_cdf` by bracketed bisection followed by Newton polish."""
    df = _check_df(df)
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {p}")

    lo, hi = 0.0, max(1.0, float(df))
    while chi_sq_cdf(hi, df) < p:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi_sq_cdf(mid, df) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-6 * max(1.0, hi):
            break

    x = 0.5 * (lo + hi)
    for _ in range(50):
        dens = chi_sq_pdf(x, df)
        if dens <= 0.0:
            break
        step = (chi_sq_cdf(x, df) - p) / dens
        x_new = x - step
        if not lo <= x_new <= hi:
            break
        x = x_new
        if abs(step) <= 1e-15 * max(1.0, x):
            break
    return x


# ---------------------------------------------------------------------------
# Bates distribution (mean of m uniforms)
# ---------------------------------------------------------------------------


def irwin_hall_cdf(s: float, m: int) -> float:
    """CDF of the sum of ``m`` independent uniform(0, 1) variables."""
    if s <= 0:
        return 0.0
    if s >= m:
        return 1.0
    total = 0.0
    for k in range(int(math.floor(s)) + 1):
        total += (-1) ** k * math.comb(m, k) * (s - k) ** m
    return min(1.0, max(0.0, total / math.factorial(m)))


def bates_cdf(x: float, m: int) -> float:
    return irwin_hall_cdf(m * x, m)


def bates_quantile(p: float, m: int) -> float:
    """p-quantile of the mean of ``m`` independent uniform(0, 1) variables.

    Exact inversion of the Irwin-Hall CDF for ``m <= 12``; normal approximation
    ``N(1/2, 1/(12 m))`` (clipped to [0, 1]) for larger ``m``.
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {p}")
    if int(m) != m or m < 1:
        raise DomainError(f"m must be a positive integer, got {m}")
    m = int(m)
    if m == 1:
        return float(p)
    if p == 0.5:
        return 0.5
    if m > BATES_EXACT_MAX_M:
        q = 0.5 + NormalDist().inv_cdf(p) * math.sqrt(1.0 / (12.0 * m))
        return min(1.0, max(0.0, q))
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if bates_cdf(mid, m) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------


def cholesky_spd(a: np.ndarray, rtol: float = 1e-12) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Returns ``(L, min_pivot)`` where ``min_pivot`` is the smallest pivot
    (diagonal of ``L`` squared).  A pivot below ``rtol * max(diag(a))`` raises
    :class:`SingularMatrixError` carrying the pivot index.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix has non-finite entries")
    scale = float(np.max(np.diag(a))) if n else 0.0
    if n and scale <= 0.0:
        raise SingularMatrixError("matrix has no positive diagonal entry", pivot=0, value=scale)
    threshold = rtol * scale
    lower = np.zeros_like(a)
    min_pivot = math.inf
    for j in range(n):
        row = lower[j, :j]
        pivot = a[j, j] - row @ row
        if not pivot > threshold:
            raise SingularMatrixError(
                f"matrix is not positive definite: pivot {j} = {pivot:.3e} "
                f"(threshold {threshold:.3e})",
                pivot=j,
                value=float(pivot),
            )
        min_pivot = min(min_pivot, pivot)
        ljj = math.sqrt(pivot)
        lower[j, j] = ljj
        if j + 1 < n:
            lower[j + 1 :, j] = (a[j + 1 :, j] - lower[j + 1 :, :j] @ row) / ljj
    return lower, float(min_pivot)


def solve_spd(a: np.ndarray, b: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Solve ``a x = b`` for symmetric positive definite ``a`` via Cholesky."""
    lower, _ = cholesky_spd(a, rtol=rtol)
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != lower.shape[0]:
        raise DomainError(f"dimension mismatch: matrix {lower.shape}, rhs {b.shape}")
    y = solve_triangular(lower, b, lower=True)
    return solve_triangular(lower.T, y, lower=False)


def gram_schmidt_columns(g: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Orthonormalize the columns of ``g`` (modified Gram-Schmidt, two passes).

    Each output column has its first nonzero entry positive.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2:
        raise DomainError(f"expected a matrix, got shape {g.shape}")
    rows, cols = g.shape
    if rows < cols:
        raise DomainError(f"need rows >= cols, got {rows}x{cols}")
    q = g.copy()
    for j in range(cols):
        v = q[:, j]
        original = np.linalg.norm(v)
        for _ in range(2):
            for i in range(j):
                v -= (q[:, i] @ v) * q[:, i]
        norm = np.linalg.norm(v)
        if norm < tol * max(1.0, original):
            raise RankError(f"column {j} is numerically dependent on earlier columns")
        v /= norm
        nz = np.flatnonzero(np.abs(v) > 1e-14)
        if nz.size and v[nz[0]] < 0:
            v *= -1.0
    return q


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream)``.

    ``child`` derives independent substreams (e.g. one per tree) so that
    parallel work does not depend on scheduling order.
    """

    seed: int
    stream: int = 0
    path: tuple[int, ...] = field(default=())

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, *self.path))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *keys: int) -> RngStream:
        return replace(self, path=self.path + tuple(int(k) for k in keys))


def sample_std_normal(rng: RngStream | np.random.Generator, n: int) -> np.ndarray:
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    return gen.standard_normal(n)
