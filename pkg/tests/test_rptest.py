import warnings

import numpy as np
import pytest

from additivity.design import total_design
from additivity.ensemble import EnsembleFit, InternalConfig, estimate_covariance
from additivity.errors import ConfigurationError
from additivity.grid import FeatureGroup, make_grid
from additivity.hypotest import quadratic_form
from additivity.numerics import RngStream, bates_quantile
from additivity.rptest import (
    ProjectionConfig,
    ProjectionDimensionWarning,
    project_fit,
    projected_statistic,
    projection_test_from_fit,
    run_projection_test,
    sample_projection,
)
from additivity.tree import Dataset

from .conftest import random_spd


def random_fit(gen, n_tilde=6, n_mc=8, n_points=16):
    return EnsembleFit(gen.standard_normal((n_tilde, n_mc, n_points)), np.arange(n_tilde), n=200, k=14)


def test_projection_orthonormal(rng):
    for dim, r in [(9, 5), (12, 1), (64, 15), (5, 5)]:
        q = sample_projection(dim, r, rng)
        np.testing.assert_allclose(q.T @ q, np.eye(r), atol=1e-12)


def test_zero_contrast_statistic(rng):
    q = sample_projection(9, 3, rng)
    assert projected_statistic(np.zeros(9), np.eye(9), q) == 0.0


def test_hand_case():
    q = np.array([[1.0], [0.0]])
    assert projected_statistic(np.array([1.0, 5.0]), np.diag([1.0, 7.0]), q) == pytest.approx(1.0)


def test_full_dimension_matches_plain_statistic(rng):
    for df in (3, 9):
        sigma = random_spd(rng, df, cond=50.0)
        u = rng.standard_normal(df)
        q = sample_projection(df, df, rng)
        assert projected_statistic(u, sigma, q) == pytest.approx(quadratic_form(u, sigma)[0], rel=1e-9)


def test_projected_covariance_matches_full(rng):
    design = total_design((4, 4))
    for _ in range(10):
        fit = random_fit(rng)
        projections = np.stack([sample_projection(design.df, 4, rng) for _ in range(3)])
        wbar, s1, skk, comb = project_fit(fit, design, projections)
        full = estimate_covariance(fit)
        u = design.matrix @ fit.mean
        for c, q in enumerate(projections):
            big = q.T @ design.matrix
            np.testing.assert_allclose(wbar[c], q.T @ u, atol=1e-10)
            np.testing.assert_allclose(s1[c], big @ full.sigma1 @ big.T, atol=1e-10)
            np.testing.assert_allclose(skk[c], big @ full.sigmakk @ big.T, atol=1e-10)
            np.testing.assert_allclose(comb[c], big @ full.combined @ big.T, atol=1e-10)


def test_transformed_design_rank(rng):
    design = total_design((5, 5))
    for _ in range(10):
        q = sample_projection(design.df, 5, rng)
        assert np.linalg.matrix_rank(q.T @ design.matrix) == 5


def test_dimension_checks():
    with pytest.raises(ConfigurationError):
        ProjectionConfig(r=9).validate(9)
    with pytest.raises(ConfigurationError):
        ProjectionConfig(M=0).validate(9)
    with pytest.warns(ProjectionDimensionWarning):
        ProjectionConfig(r=2).validate(9)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ProjectionConfig(r=5).validate(9)


def test_pure_noise_contrasts_average_near_half(rng):
    fit = random_fit(rng, n_tilde=20, n_mc=30)
    design = total_design((4, 4))
    # make every group identical in distribution and shrink the mean to ~0
    rep = projection_test_from_fit(fit, design, ProjectionConfig(r=5, M=50, rng=RngStream(4)))
    assert 0.0 <= min(rep.theta) and max(rep.theta) <= 1.0
    assert rep.u_alpha == pytest.approx(bates_quantile(0.05, 50))
    assert rep.reject == (rep.theta_bar < rep.u_alpha)
    assert len(rep.statistics) == 50


def test_constant_response_gives_theta_one():
    x = np.random.default_rng(8).uniform(size=(80, 2))
    data = Dataset(x, np.full(80, 3.0))
    lv = [0.2, 0.4, 0.6, 0.8]
    grid = make_grid([FeatureGroup.scalar(0, lv), FeatureGroup.scalar(1, lv)])
    rep = run_projection_test(
        data, grid, "total", cfg=InternalConfig(k=10, n_tilde=4, n_mc=5), proj=ProjectionConfig(r=5, M=20)
    )
    assert rep.theta == [1.0] * 20 and rep.theta_bar == 1.0
    assert not rep.reject and rep.redraws == 0


def test_decision_monotone_in_alpha(rng):
    fit = random_fit(rng, n_tilde=10, n_mc=10)
    fit = EnsembleFit(fit.predictions + 0.4 * np.arange(16) ** 1.5 / 16, fit.fixed_points, fit.n, fit.k)
    design = total_design((4, 4))
    proj = ProjectionConfig(r=5, M=40, rng=RngStream(2))
    decisions = [projection_test_from_fit(fit, design, proj, alpha=a).reject for a in (0.01, 0.05, 0.2, 0.5)]
    assert decisions == sorted(decisions)


def test_end_to_end_projection_smoke():
    gen = np.random.default_rng(0)
    x = gen.uniform(size=(300, 2))
    data = Dataset(x, x[:, 0] * x[:, 1] + 0.05 * gen.standard_normal(300))
    lv = np.linspace(0.1, 0.9, 6)
    grid = make_grid([FeatureGroup.scalar(0, lv), FeatureGroup.scalar(1, lv)])
    rep = run_projection_test(
        data, grid, "total", cfg=InternalConfig(k=30, n_tilde=10, n_mc=30), proj=ProjectionConfig(r=5, M=50)
    )
    assert rep.df == 25 and rep.details["grid_shape"] == [6, 6]
    assert rep.reject
