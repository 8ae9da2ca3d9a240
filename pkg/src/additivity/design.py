"""Difference matrices whose null space is the hypothesized model on the grid.

Each design first forms the full N x N residual operator (prediction minus its
fitted null model, computed with grid averages) and then keeps a subset of
``N - P`` linearly independent rows, chosen by column-pivoted QR.  Keeping a
full-row-rank basis makes ``D Sigma D^T`` invertible; the quadratic-form
statistic does not depend on which basis of the residual space is used.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import qr

from .errors import DegenerateDesignError, DomainError

KINDS = ("significance", "total", "partial", "weighted-anova")


@dataclass(frozen=True)
class DesignMatrix:
    """Reduced difference matrix ``matrix`` ((N-P) x N) plus the full residual operator."""

    matrix: np.ndarray
    df: int
    kind: str
    shape: tuple[int, ...]
    residual: np.ndarray

    @property
    def n_points(self) -> int:
        return self.matrix.shape[1]

    def contrasts(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    def full_residual(self, v: np.ndarray) -> np.ndarray:
        return self.residual @ v


def _operator(fn: Callable[[np.ndarray], np.ndarray], shape: tuple[int, ...]) -> np.ndarray:
    n = int(np.prod(shape))
    eye = np.eye(n).reshape(*shape, n)
    return fn(eye).reshape(n, n)


def _select_rows(full: np.ndarray, df: int) -> np.ndarray:
    _, r, piv = qr(full.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > 1e-10 * diag[0])) if diag.size else 0
    if rank != df:
        raise DegenerateDesignError(f"residual operator has rank {rank}, expected {df}")
    return full[np.sort(piv[:df])]


def _finish(full: np.ndarray, df: int, kind: str, shape: tuple[int, ...]) -> DesignMatrix:
    if df < 1:
        raise DegenerateDesignError(f"{kind} design on grid {shape} has no residual degrees of freedom")
    matrix = _select_rows(full, df)
    matrix.setflags(write=False)
    full.setflags(write=False)
    return DesignMatrix(matrix, df, kind, shape, full)


def _check_axes(shape: Sequence[int], kind: str) -> tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if any(s < 1 for s in shape):
        raise DomainError(f"grid shape must be positive, got {shape}")
    if any(s == 1 for s in shape):
        raise DegenerateDesignError(
            f"{kind} design needs at least 2 levels on every axis, got {shape}"
        )
    return shape


# ---------------------------------------------------------------------------
# residuals by averaging (operate on arrays shaped (*grid_shape, batch))
# ---------------------------------------------------------------------------


def _significance_residual(v: np.ndarray) -> np.ndarray:
    return v - v.mean(axis=1, keepdims=True)


def _total_residual(v: np.ndarray, n_axes: int) -> np.ndarray:
    out = v.copy()
    for p in range(n_axes):
        others = tuple(q for q in range(n_axes) if q != p)
        out -= v.mean(axis=others, keepdims=True)
    out += (n_axes - 1) * v.mean(axis=tuple(range(n_axes)), keepdims=True)
    return out


def _partial_residual(v: np.ndarray) -> np.ndarray:
    return (
        v
        - v.mean(axis=1, keepdims=True)
        - v.mean(axis=0, keepdims=True)
        + v.mean(axis=(0, 1), keepdims=True)
    )


def significance_design(n1: int, n2: int) -> DesignMatrix:
    """Contrasts ``F_ij - f_i.``: does the prediction vary with the second group?"""
    if n1 < 1 or n2 < 1:
        raise DomainError(f"level counts must be positive, got ({n1}, {n2})")
    if n2 == 1:
        raise DegenerateDesignError("significance design needs at least 2 levels of the tested group")
    shape = (int(n1), int(n2))
    full = _operator(_significance_residual, shape)
    return _finish(full, n1 * n2 - n1, "significance", shape)


def total_design(shape: Sequence[int]) -> DesignMatrix:
    """Residuals of the main-effects model, ``F - sum of marginal means + (d-1) * grand mean``."""
    shape = _check_axes(shape, "total")
    if len(shape) < 2:
        raise DegenerateDesignError("total additivity needs at least 2 feature groups")
    n = int(np.prod(shape))
    p = 1 + sum(s - 1 for s in shape)
    full = _operator(lambda v: _total_residual(v, len(shape)), shape)
    return _finish(full, n - p, "total", shape)


def partial_df(shape: Sequence[int]) -> int:
    n1, n2, n3 = shape
    p = 1 + (n1 - 1) + (n2 - 1) + (n3 - 1) + (n1 - 1) * (n3 - 1) + (n2 - 1) * (n3 - 1)
    return n1 * n2 * n3 - p


def partial_design(shape: Sequence[int]) -> DesignMatrix:
    """Residuals ``F_ijk - f_i.k - f_.jk + f_..k``: interaction of axes 0 and 1 given axis 2."""
    shape = _check_axes(shape, "partial")
    if len(shape) != 3:
        raise DomainError(f"partial additivity needs a 3-axis grid, got {shape}")
    full = _operator(_partial_residual, shape)
    return _finish(full, partial_df(shape), "partial", shape)


def design_for(kind: str, shape: Sequence[int]) -> DesignMatrix:
    """Dispatch on test kind."""
    shape = tuple(shape)
    if kind == "significance":
        if len(shape) != 2:
            raise DomainError(f"significance test needs exactly 2 feature groups, got {len(shape)}")
        return significance_design(*shape)
    if kind == "total":
        return total_design(shape)
    if kind == "partial":
        return partial_design(shape)
    raise DomainError(f"unknown test kind {kind!r}; expected one of significance, total, partial")


# ---------------------------------------------------------------------------
# weighted ANOVA
# ---------------------------------------------------------------------------


def anova_residual_projector(z: np.ndarray, w=None) -> np.ndarray:
    """``I - Z (Z^T W Z)^+ Z^T W`` for diagonal weights ``w`` (vector or matrix).

    The Moore-Penrose inverse truncates singular values below ``1e-10`` times
    the largest, so unidentified additive parameterizations are fine.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    if w is None:
        weights = np.ones(n)
    else:
        w = np.asarray(w, dtype=np.float64)
        weights = np.diag(w) if w.ndim == 2 else w
    if weights.shape != (n,):
        raise DomainError(f"weights must have length {n}")
    if np.any(weights <= 0):
        raise DomainError("weights must be positive")
    ztw = z.T * weights
    gram = ztw @ z
    return np.eye(n) - z @ np.linalg.pinv(gram, rcond=1e-10, hermitian=True) @ ztw


def _indicator(shape: tuple[int, ...], axes: tuple[int, ...]) -> np.ndarray:
    """0/1 matrix mapping each grid point to its cell of the ``axes`` sub-table."""
    n = int(np.prod(shape))
    sub = tuple(shape[a] for a in axes)
    out = np.zeros((n, int(np.prod(sub))))
    for flat in range(n):
        multi = np.unravel_index(flat, shape)
        out[flat, np.ravel_multi_index(tuple(multi[a] for a in axes), sub)] = 1.0
    return out


def build_main_effects_Z(shape: Sequence[int]) -> np.ndarray:
    """Concatenated per-axis indicator columns (the additive model on the grid)."""
    shape = tuple(shape)
    return np.hstack([_indicator(shape, (a,)) for a in range(len(shape))])


def build_significance_Z(n1: int, n2: int) -> np.ndarray:
    return _indicator((n1, n2), (0,))


def build_partial_Z(shape: Sequence[int]) -> np.ndarray:
    """``N x (N1 N3 + N2 N3)`` selector: row (i, j, k) picks ``F1[i, k]`` and ``F2[j, k]``."""
    shape = tuple(int(s) for s in shape)
    if len(shape) != 3 or any(s < 1 for s in shape):
        raise DomainError(f"partial Z needs a positive 3-axis shape, got {shape}")
    return np.hstack([_indicator(shape, (0, 2)), _indicator(shape, (1, 2))])


def weighted_anova_design(z: np.ndarray, w=None, shape: Sequence[int] | None = None) -> DesignMatrix:
    """Design from an arbitrary null-model matrix ``Z`` and positive point weights."""
    z = np.asarray(z, dtype=np.float64)
    full = anova_residual_projector(z, w)
    s = np.linalg.svd(z, compute_uv=False)
    rank = int(np.sum(s > 1e-10 * s[0])) if s.size and s[0] > 0 else 0
    shape = tuple(shape) if shape is not None else (z.shape[0],)
    return _finish(full, z.shape[0] - rank, "weighted-anova", shape)
