"""Subbagged ensembles built with the internal variance estimation scheme.

Trees are organized in ``n_tilde`` groups.  Every subsample in group ``i``
contains the same fixed training point, so the spread of the group averages
estimates the one-point covariance ``Sigma_1`` while the spread of all tree
predictions estimates the kernel covariance ``Sigma_kk``.  The same trees give
the ensemble prediction, so no extra trees are needed for inference.

The prediction covariance combines the two as

    Sigma = (k^2 / n) * Sigma_1 + (1 / m) * Sigma_kk,

the variance implied by the central limit theorem for incomplete U-statistics
when ``n / m`` converges to a positive constant.  The two degenerate regimes
(``n / m -> 0`` or ``-> inf``) are the limits of this expression, so they are
not handled separately.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError
from .grid import TestGrid
from .numerics import RngStream
from .tree import Dataset, TreeConfig, fit_predict_many

_FIXED_POINTS = 0
_SUBSAMPLES = 1


@dataclass(frozen=True)
class InternalConfig:
    """Subsample size ``k``, ``n_tilde`` fixed points, ``n_mc`` trees per fixed point."""

    k: int
    n_tilde: int
    n_mc: int
    rng: RngStream = field(default_factory=lambda: RngStream(0))

    @property
    def m(self) -> int:
        return self.n_tilde * self.n_mc

    def validate(self, n: int) -> None:
        if self.k < 1 or self.n_tilde < 1 or self.n_mc < 1:
            raise ConfigurationError("k, n_tilde and n_mc must all be positive")
        if self.k > n - 1:
            raise ConfigurationError(f"subsample size k={self.k} must be at most n-1={n - 1}")
        if self.n_tilde > n:
            raise ConfigurationError(f"n_tilde={self.n_tilde} exceeds the training size n={n}")
        if self.m < 2:
            raise ConfigurationError("need at least 2 trees in total")


@dataclass(frozen=True)
class EnsembleFit:
    """Per-tree grid predictions, shaped ``(n_tilde, n_mc, N)``."""

    predictions: np.ndarray
    fixed_points: np.ndarray
    n: int
    k: int

    @property
    def n_tilde(self) -> int:
        return self.predictions.shape[0]

    @property
    def n_mc(self) -> int:
        return self.predictions.shape[1]

    @property
    def m(self) -> int:
        return self.n_tilde * self.n_mc

    @property
    def n_points(self) -> int:
        return self.predictions.shape[2]

    @property
    def group_means(self) -> np.ndarray:
        return self.predictions.mean(axis=1)

    @property
    def mean(self) -> np.ndarray:
        """Ensemble prediction at every grid point."""
        return self.group_means.mean(axis=0)

    def tree_predictions(self) -> np.ndarray:
        return self.predictions.reshape(self.m, self.n_points)


@dataclass(frozen=True)
class CovarianceEstimate:
    sigma1: np.ndarray
    sigmakk: np.ndarray
    combined: np.ndarray
    n: int
    m: int
    k: int


def subsample_rows(n: int, k: int, fixed: int, rng: np.random.Generator) -> np.ndarray:
    """``k`` distinct rows including ``fixed``; the rest drawn without replacement."""
    others = rng.choice(n - 1, size=k - 1, replace=False)
    others = others + (others >= fixed)
    return np.concatenate(([fixed], others)).astype(np.int64)


def _group_rows(n: int, cfg: InternalConfig, i: int, fixed: int) -> tuple[np.ndarray, np.ndarray]:
    rows = np.empty((cfg.n_mc, cfg.k), dtype=np.int64)
    seeds = np.empty(cfg.n_mc, dtype=np.uint64)
    for j in range(cfg.n_mc):
        gen = cfg.rng.child(_SUBSAMPLES, i, j).generator()
        rows[j] = subsample_rows(n, cfg.k, fixed, gen)
        seeds[j] = gen.integers(0, 2**63, dtype=np.uint64)
    return rows, seeds


def build_internal(
    data: Dataset,
    grid: TestGrid | np.ndarray,
    tree_cfg: TreeConfig | None = None,
    cfg: InternalConfig | None = None,
    threads: int | None = 1,
) -> EnsembleFit:
    """Fit ``n_tilde * n_mc`` trees and predict each at every grid point.

    Each (group, replicate) pair draws from its own random substream, so the
    result is identical for any ``threads`` value (``None`` = all cores).
    """
    if cfg is None:
        raise ConfigurationError("an InternalConfig is required")
    tree_cfg = tree_cfg or TreeConfig()
    points = grid.points if isinstance(grid, TestGrid) else np.asarray(grid, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise DomainError("grid must contain at least one point")
    if points.shape[1] != data.d:
        raise DomainError(f"grid points have {points.shape[1]} features, data has {data.d}")
    cfg.validate(data.n)

    fixed = cfg.rng.child(_FIXED_POINTS).generator().choice(data.n, size=cfg.n_tilde, replace=False)
    points = np.ascontiguousarray(points)

    def work(i: int) -> np.ndarray:
        rows, seeds = _group_rows(data.n, cfg, i, int(fixed[i]))
        return fit_predict_many(data, rows, points, tree_cfg, seeds)

    workers = threads or os.cpu_count() or 1
    if workers == 1:
        blocks = [work(i) for i in range(cfg.n_tilde)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(work, range(cfg.n_tilde)))
    predictions = np.stack(blocks)
    return EnsembleFit(predictions, fixed.astype(np.int64), data.n, cfg.k)


def combine_covariance(sigma1: np.ndarray, sigmakk: np.ndarray, n: int, m: int, k: int) -> np.ndarray:
    """``(k^2 / n) * sigma1 + sigmakk / m``."""
    return (k * k / n) * np.asarray(sigma1) + np.asarray(sigmakk) / m


def _sample_cov(rows: np.ndarray) -> np.ndarray:
    centered = rows - rows.mean(axis=0)
    cov = centered.T @ centered / (rows.shape[0] - 1)
    return 0.5 * (cov + cov.T)


def estimate_covariance(fit: EnsembleFit, n: int | None = None) -> CovarianceEstimate:
    """Covariance of the group means, covariance of all trees, and their combination."""
    n = fit.n if n is None else int(n)
    if fit.n_tilde < 2:
        raise ConfigurationError("need n_tilde >= 2 to estimate the one-point covariance")
    if fit.m < 2:
        raise ConfigurationError("need at least 2 trees to estimate the kernel covariance")
    sigma1 = _sample_cov(fit.group_means)
    sigmakk = _sample_cov(fit.tree_predictions())
    combined = combine_covariance(sigma1, sigmakk, n, fit.m, fit.k)
    return CovarianceEstimate(sigma1, sigmakk, combined, n, fit.m, fit.k)
