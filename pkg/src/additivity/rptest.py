"""Random-projection version of the grid test for large grids.

The residual contrasts ``D V`` are projected onto ``M`` random semi-orthogonal
``r``-dimensional subspaces.  Each projection gives a chi-square(r) p-value;
the test rejects when the average p-value falls below the ``alpha`` quantile
of the Bates distribution (mean of ``M`` uniforms).

All covariance bookkeeping happens in the projected space: every tree's grid
predictions are mapped through ``D`` and each ``R_c`` and the one-point and
kernel covariances are accumulated there, so no N x N matrix is ever inverted.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .design import DesignMatrix, design_for
from .ensemble import EnsembleFit, InternalConfig, build_internal, combine_covariance
from .errors import ConfigurationError, DomainError, RankError, SingularMatrixError
from .grid import TestGrid
from .hypotest import DEFAULT_ALPHA, check_grid_for_kind, contrasts_vanish, quadratic_form
from .numerics import RngStream, bates_quantile, chi_sq_sf, gram_schmidt_columns
from .tree import Dataset, TreeConfig

RECOMMENDED_R = (5, 15)
MAX_REDRAWS = 10


class ProjectionDimensionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ProjectionConfig:
    r: int = 5
    M: int = 1000
    rng: RngStream = field(default_factory=lambda: RngStream(0, stream=1))

    def validate(self, df: int) -> None:
        if self.M < 1:
            raise ConfigurationError("number of projections M must be >= 1")
        if not 1 <= self.r < df:
            raise ConfigurationError(
                f"projected dimension r={self.r} must satisfy 1 <= r < {df} (design degrees of freedom)"
            )
        lo, hi = RECOMMENDED_R
        if not lo <= self.r <= hi:
            warnings.warn(
                f"projected dimension r={self.r} is outside the usual range {lo}..{hi}",
                ProjectionDimensionWarning,
                stacklevel=3,
            )


@dataclass
class ProjectionReport:
    theta: list[float]
    theta_bar: float
    u_alpha: float
    reject: bool
    r: int
    M: int
    alpha: float
    kind: str
    df: int
    statistics: list[float]
    redraws: int = 0
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def sample_projection(dim: int, r: int, rng: RngStream | np.random.Generator, max_tries: int = MAX_REDRAWS) -> np.ndarray:
    """``dim x r`` matrix with orthonormal columns from Gram-Schmidt on Gaussian draws."""
    if not 1 <= r <= dim:
        raise DomainError(f"need 1 <= r <= dim, got r={r}, dim={dim}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    for _ in range(max_tries):
        try:
            return gram_schmidt_columns(gen.standard_normal((dim, r)))
        except RankError:
            continue
    raise RankError(f"failed to draw a rank-{r} projection in {max_tries} attempts")


def projected_statistic(u: np.ndarray, sigma_d: np.ndarray, r_mat: np.ndarray) -> float:
    """``u^T R (R^T Sigma_D R)^{-1} R^T u``."""
    r_mat = np.asarray(r_mat, dtype=np.float64)
    if r_mat.ndim == 1:
        r_mat = r_mat.reshape(-1, 1)
    w = r_mat.T @ np.asarray(u, dtype=np.float64)
    proj_cov = r_mat.T @ np.asarray(sigma_d, dtype=np.float64) @ r_mat
    statistic, _ = quadratic_form(w, 0.5 * (proj_cov + proj_cov.T))
    return statistic


def project_fit(fit: EnsembleFit, design: DesignMatrix, projections: np.ndarray, n: int | None = None):
    """Projected ensemble mean and covariances for each projection.

    ``projections`` has shape ``(M, df, r)``.  Returns ``(wbar, sigma1,
    sigmakk, combined)`` with shapes ``(M, r)`` and ``(M, r, r)``.
    """
    n = fit.n if n is None else int(n)
    M, df, r = projections.shape
    if df != design.df:
        raise DomainError(f"projections have {df} rows, design has {design.df} degrees of freedom")
    # N x (M r): grid predictions -> contrasts -> every projection at once
    basis = design.matrix.T @ projections.transpose(1, 0, 2).reshape(df, M * r)
    wbar = fit.mean @ basis

    group_means = np.empty((fit.n_tilde, M * r))
    kk = np.zeros((M, r, r))
    for i in range(fit.n_tilde):
        w = fit.predictions[i] @ basis
        group_means[i] = w.mean(axis=0)
        c = (w - wbar).reshape(fit.n_mc, M, r)
        kk += np.einsum("tci,tcj->cij", c, c)
    sigmakk = kk / (fit.m - 1)

    g = (group_means - group_means.mean(axis=0)).reshape(fit.n_tilde, M, r)
    sigma1 = np.einsum("tci,tcj->cij", g, g) / (fit.n_tilde - 1)
    combined = combine_covariance(sigma1, sigmakk, n, fit.m, fit.k)
    return wbar.reshape(M, r), sigma1, sigmakk, combined


def projection_test_from_fit(
    fit: EnsembleFit,
    design: DesignMatrix,
    proj: ProjectionConfig,
    alpha: float = DEFAULT_ALPHA,
    n: int | None = None,
) -> ProjectionReport:
    """Averaged-p-value projection test on an already built ensemble."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if fit.n_tilde < 2:
        raise ConfigurationError("need n_tilde >= 2 to estimate the one-point covariance")
    proj.validate(design.df)
    gen = proj.rng.generator()
    projections = np.stack([sample_projection(design.df, proj.r, gen) for _ in range(proj.M)])

    wbar, _, _, combined = project_fit(fit, design, projections, n)
    scale = float(np.max(np.abs(fit.mean), initial=0.0))
    stats = np.empty(proj.M)
    redraws = 0
    for c in range(proj.M):
        for attempt in range(MAX_REDRAWS + 1):
            try:
                stats[c], _ = quadratic_form(wbar[c], 0.5 * (combined[c] + combined[c].T))
                break
            except SingularMatrixError:
                if contrasts_vanish(wbar[c], scale):
                    stats[c] = 0.0
                    break
                if attempt == MAX_REDRAWS:
                    raise
                redraws += 1
                fresh = sample_projection(design.df, proj.r, gen)[None]
                w1, _, _, c1 = project_fit(fit, design, fresh, n)
                wbar[c], combined[c] = w1[0], c1[0]

    theta = [chi_sq_sf(float(s), proj.r) for s in stats]
    theta_bar = float(np.mean(theta))
    u_alpha = bates_quantile(alpha, proj.M)
    return ProjectionReport(
        theta=theta,
        theta_bar=theta_bar,
        u_alpha=u_alpha,
        reject=bool(theta_bar < u_alpha),
        r=proj.r,
        M=proj.M,
        alpha=float(alpha),
        kind=design.kind,
        df=design.df,
        statistics=stats.tolist(),
        redraws=redraws,
    )


def run_projection_test(
    data: Dataset,
    grid: TestGrid,
    kind: str,
    tree_cfg: TreeConfig | None = None,
    cfg: InternalConfig | None = None,
    proj: ProjectionConfig | None = None,
    alpha: float = DEFAULT_ALPHA,
    threads: int | None = 1,
) -> ProjectionReport:
    """Build the ensemble and run the projection test of the given ``kind``."""
    proj = proj or ProjectionConfig()
    check_grid_for_kind(grid, kind)
    design = design_for(kind, grid.shape)
    proj.validate(design.df)
    fit = build_internal(data, grid, tree_cfg, cfg, threads=threads)
    report = projection_test_from_fit(fit, design, proj, alpha, data.n)
    report.details.update(
        n=data.n, k=fit.k, n_tilde=fit.n_tilde, n_mc=fit.n_mc, m=fit.m, grid_shape=list(grid.shape)
    )
    return report
