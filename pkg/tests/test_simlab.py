import math

import numpy as np
import pytest

from additivity.errors import ConfigurationError, DomainError
from additivity.numerics import RngStream
from additivity.simlab import (
    REGISTRY,
    SimSpec,
    default_levels,
    get_model,
    ols_interaction_ttest,
    registry_eval,
    run_campaign,
    simulate_dataset,
    table_models,
)
from additivity.tree import Dataset


def test_registry_values():
    assert registry_eval("x1x2", [0.5, 0.5]) == pytest.approx(0.25)
    assert registry_eval("sigmoid-sum", [0.0, 0.0]) == pytest.approx(-0.5)
    assert registry_eval("linear-interaction", [0.3, 0.6], beta=0.0) == pytest.approx(0.9)
    assert registry_eval("linear-interaction", [0.3, 0.6], beta=2.0) == pytest.approx(0.9 + 0.36)
    assert registry_eval("sin-sum2", [0.25, 0.0]) == pytest.approx(1.0)
    assert registry_eval("poly-x1x2", [1.0, 0.5]) == pytest.approx(1.0)
    assert registry_eval("exp-x1x3+exp-x2x3", [0.0, 0.0, 0.7]) == pytest.approx(2.0)
    np.testing.assert_allclose(registry_eval("sum3", np.eye(3)), 1.0)
    with pytest.raises(KeyError):
        get_model("nope")
    with pytest.raises(DomainError):
        registry_eval("sum3", [0.1, 0.2])


def test_table_inventory():
    alpha = table_models(2, "alpha")
    power = table_models(2, "power")
    assert len(alpha) == 7 and len(power) == 7
    assert {m.kind for m in alpha + power} == {"total", "partial"}
    for m in alpha + power:
        assert (m.kind == "partial") == (m.d == 3 and "x3" in m.formula and m.id not in {"sum3", "exp-sum3"})
    assert [m.id for m in table_models(1)] == ["linear-interaction"]


def test_alpha_models_are_null():
    """Every alpha-level model is additive in the tested sense on a random grid."""
    gen = np.random.default_rng(0)
    for m in table_models(2, "alpha"):
        a, b = gen.uniform(size=(2, m.d))
        if m.kind == "total":
            # f(a) + f(b) = f(mixed) + f(other mixed) for additive f
            mix1, mix2 = a.copy(), b.copy()
            mix1[0], mix2[0] = b[0], a[0]
        else:
            # partial: swap x1 holding x3 fixed
            b[2] = a[2]
            mix1, mix2 = a.copy(), b.copy()
            mix1[0], mix2[0] = b[0], a[0]
        lhs = registry_eval(m.id, a) + registry_eval(m.id, b)
        rhs = registry_eval(m.id, mix1) + registry_eval(m.id, mix2)
        assert lhs == pytest.approx(rhs, abs=1e-12), m.id


def test_default_levels():
    assert default_levels(2, "ensemble") == [0.2, 0.4, 0.6, 0.8]
    assert default_levels(3, "ensemble") == [0.3, 0.5, 0.7]
    assert len(default_levels(2, "projection")) == 10
    assert SimSpec("x1x2x3", method="projection").grid().n_points == 125


def test_ols_exact_fit_and_normal_equations():
    x = np.random.default_rng(2).uniform(size=(30, 2))
    rep = ols_interaction_ttest(Dataset(x, 1 + 2 * x[:, 0] - x[:, 1]))
    assert rep.details["estimate"] == pytest.approx(0.0, abs=1e-10)
    assert not rep.reject

    x = np.array([[0.1, 0.2], [0.4, 0.9], [0.5, 0.5], [0.8, 0.3], [0.9, 0.7]])
    y = np.array([1.0, 2.0, 1.5, 0.5, 3.0])
    rep = ols_interaction_ttest(Dataset(x, y))
    a = np.column_stack([np.ones(5), x[:, 0], x[:, 1], x[:, 0] * x[:, 1]])
    coef = np.linalg.solve(a.T @ a, a.T @ y)
    resid = y - a @ coef
    se = math.sqrt(resid @ resid / 1 * np.linalg.inv(a.T @ a)[3, 3])
    assert rep.details["estimate"] == pytest.approx(coef[3], rel=1e-9)
    assert rep.details["std_error"] == pytest.approx(se, rel=1e-9)
    assert rep.statistic == pytest.approx((coef[3] / se) ** 2, rel=1e-9)


def test_ols_detects_interaction():
    x = np.random.default_rng(3).uniform(size=(250, 2))
    rep = ols_interaction_ttest(Dataset(x, x[:, 0] * x[:, 1] + 0.05 * np.random.default_rng(4).standard_normal(250)))
    assert rep.reject and rep.p_value < 1e-10


def test_simulated_data_shape_and_reproducibility():
    spec = SimSpec("sum3", n=40)
    a = simulate_dataset(spec, RngStream(5))
    b = simulate_dataset(spec, RngStream(5))
    assert a.features.shape == (40, 3)
    np.testing.assert_array_equal(a.response, b.response)
    assert np.all((a.features >= 0) & (a.features <= 1))


def test_campaign_determinism_and_thread_invariance():
    spec = SimSpec("x1", n=120, k=12, n_tilde=5, n_mc=10, replications=4, seed=3)
    a = run_campaign(spec)
    b = run_campaign(spec, threads=2)
    assert a.statistics == b.statistics and a.decisions == b.decisions
    rows = a.rows()
    assert len(rows) == 5 and rows[-1]["summary"]
    assert rows[-1]["binomial_se"] == pytest.approx(math.sqrt(a.rejection_rate * (1 - a.rejection_rate) / 4))


def test_constant_model_never_rejects():
    res = run_campaign(SimSpec("constant", n=100, k=10, n_tilde=4, n_mc=5, replications=3, noise_sd=0.0))
    assert res.rejection_rate == 0.0


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        run_campaign(SimSpec("sum3", method="ols"))
    with pytest.raises(ConfigurationError):
        run_campaign(SimSpec("x1", replications=0))
    with pytest.raises(ConfigurationError):
        run_campaign(SimSpec("x1", method="bogus"))
    assert set(REGISTRY) >= {"x1x2", "x1x2x3", "constant"}
