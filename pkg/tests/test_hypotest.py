import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from additivity.design import DesignMatrix, total_design
from additivity.errors import DomainError
from additivity.grid import FeatureGroup, make_grid
from additivity.hypotest import (
    SingularCovarianceError,
    check_grid_for_kind,
    end_to_end_test,
    quadratic_form,
    run_grid_test,
)
from additivity.ensemble import InternalConfig
from additivity.numerics import RngStream, chi_sq_sf

from .conftest import random_spd, uniform_dataset


def triple_loop_statistic(u, sigma):
    """Oracle: Gauss-Jordan inverse then explicit double sum."""
    n = len(u)
    a = np.hstack([sigma.astype(float).copy(), np.eye(n)])
    for c in range(n):
        p = c + np.argmax(np.abs(a[c:, c]))
        a[[c, p]] = a[[p, c]]
        a[c] /= a[c, c]
        for r in range(n):
            if r != c:
                a[r] -= a[r, c] * a[c]
    inv = a[:, n:]
    return sum(u[i] * inv[i, j] * u[j] for i in range(n) for j in range(n))


def identity_design(df):
    return DesignMatrix(np.eye(df), df, "identity", (df,), np.eye(df))


def test_zero_contrast():
    r = run_grid_test(np.zeros(3), np.eye(3), identity_design(3))
    assert r.statistic == 0.0 and r.p_value == 1.0 and not r.reject


def test_unit_example():
    r = run_grid_test(np.ones(2), np.eye(2), identity_design(2))
    assert r.statistic == pytest.approx(2.0)
    assert r.p_value == pytest.approx(math.exp(-1.0), abs=1e-10)
    assert not r.reject


def test_reject_large_statistic():
    u = np.zeros(9)
    u[0] = math.sqrt(52.30)
    r = run_grid_test(u, np.eye(9), identity_design(9))
    assert r.statistic == pytest.approx(52.30)
    assert r.p_value < 1e-6 and r.reject
    assert r.critical_value == pytest.approx(16.919, abs=1e-3)


def test_against_triple_loop(rng):
    for df in (1, 3, 7, 12):
        sigma = random_spd(rng, df, cond=1e3)
        u = rng.standard_normal(df)
        stat, _ = quadratic_form(u, sigma)
        assert stat == pytest.approx(triple_loop_statistic(u, sigma), rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 10), st.integers(0, 2**31), st.floats(1e-3, 1e3))
def test_basis_and_scale_invariance(df, seed, scale):
    gen = np.random.default_rng(seed)
    sigma = random_spd(gen, df, cond=100.0)
    u = gen.standard_normal(df)
    stat, _ = quadratic_form(u, sigma)
    a = gen.standard_normal((df, df)) + 3 * np.eye(df)
    stat_a, _ = quadratic_form(a @ u, a @ sigma @ a.T)
    assert stat_a == pytest.approx(stat, rel=1e-8, abs=1e-10)
    stat_s, _ = quadratic_form(scale * u, scale**2 * sigma)
    assert stat_s == pytest.approx(stat, rel=1e-8, abs=1e-10)


def test_singular_covariance_reported():
    with pytest.raises(SingularCovarianceError) as info:
        run_grid_test(np.arange(16.0) ** 2, np.zeros((16, 16)), total_design((4, 4)))
    assert info.value.pivot == 0


def test_dimension_mismatch():
    with pytest.raises(DomainError):
        run_grid_test(np.ones(5), np.eye(16), total_design((4, 4)))
    with pytest.raises(DomainError):
        run_grid_test(np.ones(2), np.eye(2), identity_design(2), alpha=1.5)


def test_report_consistency(rng):
    design = total_design((3, 3))
    for _ in range(20):
        v = rng.standard_normal(9)
        r = run_grid_test(v, np.eye(9), design, alpha=0.1)
        assert r.p_value == pytest.approx(chi_sq_sf(r.statistic, r.df))
        assert r.reject == (r.p_value < 0.1)
        assert r.reject == (r.statistic > r.critical_value)
        assert r.min_pivot > 0
    assert set(r.to_dict()) >= {"statistic", "df", "p_value", "reject", "kind"}


def test_grid_kind_checks():
    g2 = make_grid([FeatureGroup.scalar(0, [0.3, 0.6]), FeatureGroup.scalar(1, [0.3, 0.6])])
    check_grid_for_kind(g2, "total")
    check_grid_for_kind(g2, "significance")
    with pytest.raises(DomainError):
        check_grid_for_kind(g2, "partial")


def test_end_to_end_smoke():
    data = uniform_dataset(lambda x: x[:, 0] * x[:, 1], 500, 2, 0.05, seed=2)
    levels = [0.2, 0.4, 0.6, 0.8]
    grid = make_grid([FeatureGroup.scalar(0, levels), FeatureGroup.scalar(1, levels)])
    cfg = InternalConfig(k=50, n_tilde=25, n_mc=100, rng=RngStream(1))
    r = end_to_end_test(data, grid, "total", cfg=cfg)
    assert r.df == 9 and r.reject
    assert r.details["m"] == 2500


def test_constant_response_never_rejects():
    data = uniform_dataset(lambda x: np.zeros(len(x)), 60, 3, 0.0, seed=1)
    lv = [0.3, 0.5, 0.7]
    cfg = InternalConfig(k=8, n_tilde=4, n_mc=4)
    g2 = make_grid([FeatureGroup.scalar(0, lv), FeatureGroup((1, 2), [[0.3, 0.3], [0.7, 0.7]])])
    g3 = make_grid([FeatureGroup.scalar(i, lv) for i in range(3)])
    for kind, grid in [("total", g2), ("significance", g2), ("total", g3), ("partial", g3)]:
        r = end_to_end_test(data, grid, kind, cfg=cfg)
        assert r.statistic == 0.0 and r.p_value == 1.0 and not r.reject
