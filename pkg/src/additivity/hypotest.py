"""Quadratic-form chi-square tests on grid predictions."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from scipy.linalg import solve_triangular

from .design import DesignMatrix, design_for
from .ensemble import CovarianceEstimate, InternalConfig, build_internal, estimate_covariance
from .errors import DomainError, SingularMatrixError
from .grid import TestGrid
from .numerics import chi_sq_quantile, chi_sq_sf, cholesky_spd
from .tree import Dataset, TreeConfig

DEFAULT_ALPHA = 0.05
PIVOT_RTOL = 1e-12
VANISHING_RTOL = 1e-10


class SingularCovarianceError(SingularMatrixError):
    """The projected covariance ``D Sigma D^T`` is not numerically positive definite."""


@dataclass
class TestReport:
    statistic: float
    df: int
    p_value: float
    alpha: float
    reject: bool
    kind: str
    min_pivot: float
    critical_value: float
    details: dict[str, Any] = field(default_factory=dict)

    __test__ = False

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _check_alpha(alpha: float) -> float:
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    return float(alpha)


def quadratic_form(u: np.ndarray, sigma: np.ndarray, rtol: float = PIVOT_RTOL) -> tuple[float, float]:
    """``(u^T sigma^{-1} u, smallest Cholesky pivot)``."""
    lower, min_pivot = cholesky_spd(sigma, rtol=rtol)
    z = solve_triangular(lower, np.asarray(u, dtype=np.float64), lower=True)
    return float(z @ z), min_pivot


def contrasts_vanish(u: np.ndarray, scale: float) -> bool:
    """True when the contrasts are zero up to rounding relative to ``scale``.

    Constant responses give exactly additive predictions together with an
    all-zero covariance; that case carries no evidence against the null and
    is reported as statistic 0 instead of a singular-matrix failure.
    """
    return float(np.max(np.abs(u), initial=0.0)) <= VANISHING_RTOL * max(1.0, float(scale))


def make_report(statistic: float, df: int, alpha: float, kind: str, min_pivot: float, **details) -> TestReport:
    p_value = chi_sq_sf(statistic, df)
    return TestReport(
        statistic=float(statistic),
        df=int(df),
        p_value=float(p_value),
        alpha=alpha,
        reject=bool(p_value < alpha),
        kind=kind,
        min_pivot=float(min_pivot),
        critical_value=chi_sq_quantile(1.0 - alpha, df),
        details=details,
    )


def run_grid_test(
    vhat: np.ndarray,
    cov: CovarianceEstimate | np.ndarray,
    design: DesignMatrix,
    alpha: float = DEFAULT_ALPHA,
) -> TestReport:
    """Chi-square test of ``design @ vhat = 0`` given the prediction covariance.

    ``cov`` may be a :class:`CovarianceEstimate` or a raw N x N covariance.
    """
    alpha = _check_alpha(alpha)
    vhat = np.asarray(vhat, dtype=np.float64)
    sigma = np.asarray(getattr(cov, "combined", cov), dtype=np.float64)
    d = design.matrix
    if vhat.shape != (d.shape[1],) or sigma.shape != (d.shape[1], d.shape[1]):
        raise DomainError(
            f"dimension mismatch: design {d.shape}, predictions {vhat.shape}, covariance {sigma.shape}"
        )
    u = d @ vhat
    sigma_d = d @ sigma @ d.T
    sigma_d = 0.5 * (sigma_d + sigma_d.T)
    try:
        statistic, min_pivot = quadratic_form(u, sigma_d)
    except SingularMatrixError as exc:
        if contrasts_vanish(u, np.max(np.abs(vhat), initial=0.0)):
            return make_report(0.0, design.df, alpha, design.kind, 0.0, vanishing_contrasts=True)
        raise SingularCovarianceError(
            f"covariance of the {design.kind} contrasts is singular ({exc}); "
            "use a larger ensemble (n_tilde, n_mc) or the random-projection test",
            pivot=exc.pivot,
            value=exc.value,
        ) from exc
    return make_report(statistic, design.df, alpha, design.kind, min_pivot)


def check_grid_for_kind(grid: TestGrid, kind: str) -> None:
    n_groups = len(grid.groups)
    if kind == "significance" and n_groups != 2:
        raise DomainError("significance test needs exactly 2 feature groups (reduced, additional)")
    if kind == "total" and n_groups < 2:
        raise DomainError("total additivity test needs at least 2 feature groups")
    if kind == "partial" and n_groups != 3:
        raise DomainError("partial additivity test needs exactly 3 feature groups (first, second, conditioning)")


def end_to_end_test(
    data: Dataset,
    grid: TestGrid,
    kind: str,
    tree_cfg: TreeConfig | None = None,
    cfg: InternalConfig | None = None,
    alpha: float = DEFAULT_ALPHA,
    threads: int | None = 1,
) -> TestReport:
    """Build the ensemble on ``data``, estimate its covariance and run the ``kind`` test."""
    alpha = _check_alpha(alpha)
    check_grid_for_kind(grid, kind)
    design = design_for(kind, grid.shape)
    fit = build_internal(data, grid, tree_cfg, cfg, threads=threads)
    cov = estimate_covariance(fit, data.n)
    report = run_grid_test(fit.mean, cov, design, alpha)
    report.details.update(
        n=data.n, k=fit.k, n_tilde=fit.n_tilde, n_mc=fit.n_mc, m=fit.m, grid_shape=list(grid.shape)
    )
    return report
