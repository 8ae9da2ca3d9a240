"""Monte Carlo harness for empirical alpha-levels and power.

Features are drawn uniformly on the unit cube, the response is a registered
regression function plus Gaussian noise, and each replication runs one test
(plain grid test, projection test, or the OLS interaction t-test baseline).
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np

from .ensemble import InternalConfig
from .errors import ConfigurationError, DomainError, RankError, SingularMatrixError
from .grid import FeatureGroup, TestGrid, make_grid
from .hypotest import DEFAULT_ALPHA, TestReport, end_to_end_test, make_report
from .numerics import RngStream, solve_spd
from .rptest import ProjectionConfig, run_projection_test
from .tree import Dataset, TreeConfig

METHODS = ("ensemble", "projection", "ols")


@dataclass(frozen=True)
class Model:
    id: str
    formula: str
    d: int
    kind: str
    fn: Callable[[np.ndarray, float], np.ndarray]
    role: str | None = None  # "alpha" or "power" for the tabulated models
    table: int | None = None


def _cols(x):
    return [x[:, i] for i in range(x.shape[1])]


def _poly(t):
    return 64.0 * t**3 * (1.0 - t) ** 3


_MODELS = [
    Model("x1", "y = x1", 2, "total", lambda x, b: x[:, 0], "alpha", 2),
    Model("exp-x1", "y = exp(x1)", 2, "total", lambda x, b: np.exp(x[:, 0]), "alpha", 2),
    Model(
        "exp-x1-sin-x2", "y = exp(x1) + sin(pi x2)", 2, "total",
        lambda x, b: np.exp(x[:, 0]) + np.sin(np.pi * x[:, 1]), "alpha", 2,
    ),
    Model("sum3", "y = x1 + x2 + x3", 3, "total", lambda x, b: x[:, 0] + x[:, 1] + x[:, 2], "alpha", 2),
    Model("exp-sum3", "y = exp(x1) + exp(x2) + exp(x3)", 3, "total", lambda x, b: np.exp(x).sum(axis=1), "alpha", 2),
    Model("x1x3+x2x3", "y = x1 x3 + x2 x3", 3, "partial", lambda x, b: x[:, 0] * x[:, 2] + x[:, 1] * x[:, 2], "alpha", 2),
    Model(
        "exp-x1x3+exp-x2x3", "y = exp(x1 x3) + exp(x2 x3)", 3, "partial",
        lambda x, b: np.exp(x[:, 0] * x[:, 2]) + np.exp(x[:, 1] * x[:, 2]), "alpha", 2,
    ),
    Model("x1x2", "y = x1 x2", 2, "total", lambda x, b: x[:, 0] * x[:, 1], "power", 2),
    Model("x1x2x3", "y = x1 x2 x3", 3, "partial", lambda x, b: x[:, 0] * x[:, 1] * x[:, 2], "power", 2),
    Model(
        "sigmoid-sum", "y = exp(5(x1 + x2)) / (1 + exp(5(x1 + x2))) - 1", 2, "total",
        lambda x, b: 1.0 / (1.0 + np.exp(-5.0 * (x[:, 0] + x[:, 1]))) - 1.0, "power", 2,
    ),
    Model(
        "sin-sum2", "y = 0.5 (1 + sin(2 pi (x1 + x2)))", 2, "total",
        lambda x, b: 0.5 * (1.0 + np.sin(2.0 * np.pi * (x[:, 0] + x[:, 1]))), "power", 2,
    ),
    Model(
        "sin-sum3", "y = 0.5 (1 + sin(2 pi (x1 + x2 + x3)))", 3, "partial",
        lambda x, b: 0.5 * (1.0 + np.sin(2.0 * np.pi * x.sum(axis=1))), "power", 2,
    ),
    Model(
        "poly-x1x2", "y = 64 (x1 x2)^3 (1 - x1 x2)^3", 2, "total",
        lambda x, b: _poly(x[:, 0] * x[:, 1]), "power", 2,
    ),
    Model(
        "poly-x1x2x3", "y = 64 (x1 x2 x3)^3 (1 - x1 x2 x3)^3", 3, "partial",
        lambda x, b: _poly(x[:, 0] * x[:, 1] * x[:, 2]), "power", 2,
    ),
    Model(
        "linear-interaction", "y = x1 + x2 + beta x1 x2", 2, "total",
        lambda x, b: x[:, 0] + x[:, 1] + b * x[:, 0] * x[:, 1], None, 1,
    ),
    Model("constant", "y = 0", 2, "total", lambda x, b: np.zeros(x.shape[0])),
]

REGISTRY: dict[str, Model] = {m.id: m for m in _MODELS}


def get_model(function_id: str) -> Model:
    try:
        return REGISTRY[function_id]
    except KeyError:
        raise KeyError(f"unknown regression function {function_id!r}; known: {sorted(REGISTRY)}") from None


def registry_eval(function_id: str, x, beta: float = 0.0):
    """Evaluate a registered regression function at one point or at each row of a matrix."""
    model = get_model(function_id)
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] < model.d:
        raise DomainError(f"model {function_id} needs {model.d} features, got {arr.shape[1]}")
    out = model.fn(arr, float(beta))
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# OLS baseline
# ---------------------------------------------------------------------------


def ols_interaction_ttest(data: Dataset, alpha: float = DEFAULT_ALPHA) -> TestReport:
    """t-test of the ``x1 * x2`` coefficient in ``y ~ 1 + x1 + x2 + x1 x2``.

    The p-value uses the normal approximation to ``t_{n-4}``; the report's
    statistic is ``t^2`` with one degree of freedom.
    """
    if data.d < 2:
        raise DomainError("the interaction t-test needs two features")
    if data.n <= 4:
        raise DomainError("the interaction t-test needs more than 4 observations")
    x1, x2 = data.features[:, 0], data.features[:, 1]
    design = np.column_stack([np.ones(data.n), x1, x2, x1 * x2])
    y = data.response
    gram = design.T @ design
    try:
        coef = solve_spd(gram, design.T @ y)
        var_col = solve_spd(gram, np.eye(4)[:, 3])[3]
    except SingularMatrixError as exc:
        raise RankError(f"interaction regression design is rank deficient: {exc}") from exc
    resid = y - design @ coef
    rss = float(resid @ resid)
    estimate = float(coef[3])
    if rss <= 1e-24 * max(float(y @ y), 1e-300):
        # exact fit: the interaction is known without error
        se = 0.0
        t = 0.0 if abs(estimate) <= 1e-10 * max(1.0, float(np.abs(coef).max())) else math.inf
    else:
        se = math.sqrt(rss / (data.n - 4) * var_col)
        t = estimate / se
    return make_report(
        t * t, 1, alpha, "ols-interaction", float("nan"),
        coefficients=coef.tolist(), estimate=estimate, std_error=se, t=t,
    )


# ---------------------------------------------------------------------------
# campaigns
# ---------------------------------------------------------------------------


def default_levels(d: int, method: str) -> list[float]:
    if method == "projection":
        count = 10 if d == 2 else 5
        return np.round(np.linspace(0.1, 0.9, count), 12).tolist()
    return [0.2, 0.4, 0.6, 0.8] if d == 2 else [0.3, 0.5, 0.7]


@dataclass(frozen=True)
class SimSpec:
    function_id: str
    n: int = 500
    k: int = 50
    n_tilde: int = 50
    n_mc: int = 250
    kind: str | None = None
    replications: int = 100
    noise_sd: float = 0.05
    seed: int = 0
    beta: float = 0.0
    method: str = "ensemble"
    levels: tuple[tuple[float, ...], ...] | None = None
    alpha: float = DEFAULT_ALPHA
    r: int = 5
    M: int = 1000
    tree: TreeConfig = field(default_factory=TreeConfig)

    @property
    def model(self) -> Model:
        return get_model(self.function_id)

    @property
    def test_kind(self) -> str:
        return self.kind or self.model.kind

    def validate(self) -> None:
        self.model  # raises on unknown id
        if self.replications < 1:
            raise ConfigurationError("replications must be >= 1")
        if self.noise_sd < 0:
            raise ConfigurationError("noise_sd must be nonnegative")
        if self.method not in METHODS:
            raise ConfigurationError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.method == "ols" and self.model.d != 2:
            raise ConfigurationError("the OLS baseline applies to two-feature models only")
        if self.levels is not None and len(self.levels) != self.model.d:
            raise ConfigurationError(f"need one level list per feature ({self.model.d})")

    def grid(self) -> TestGrid:
        d = self.model.d
        levels = self.levels or tuple(tuple(default_levels(d, self.method)) for _ in range(d))
        return make_grid([FeatureGroup.scalar(i, lv) for i, lv in enumerate(levels)])

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["kind"] = self.test_kind
        out["levels"] = [list(lv) for lv in self.levels] if self.levels else None
        return out


@dataclass
class SimResult:
    rejection_rate: float
    replications: int
    rejections: int
    binomial_se: float
    statistics: list[float]
    p_values: list[float]
    decisions: list[bool]
    wall_time: float
    spec: dict[str, Any] = field(default_factory=dict)

    def rows(self) -> list[dict[str, Any]]:
        """One record per replication followed by a summary record."""
        out = [
            {"replication": i, "statistic": s, "p_value": p, "reject": r}
            for i, (s, p, r) in enumerate(zip(self.statistics, self.p_values, self.decisions))
        ]
        out.append(
            {
                "summary": True,
                "rejection_rate": self.rejection_rate,
                "binomial_se": self.binomial_se,
                "replications": self.replications,
                "rejections": self.rejections,
                "wall_time": self.wall_time,
                "spec": self.spec,
            }
        )
        return out

    def to_ndjson(self) -> str:
        return "\n".join(json.dumps(row) for row in self.rows()) + "\n"


def simulate_dataset(spec: SimSpec, rng: RngStream | np.random.Generator) -> Dataset:
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    d = spec.model.d
    x = gen.uniform(0.0, 1.0, size=(spec.n, d))
    y = spec.model.fn(x, spec.beta) + spec.noise_sd * gen.standard_normal(spec.n)
    return Dataset(x, y)


def run_replication(spec: SimSpec, index: int, grid: TestGrid | None = None) -> tuple[float, float, bool]:
    """Return ``(statistic, p_value, reject)`` for replication ``index``.

    For projection tests both the statistic and the p-value are the averaged
    p-value.
    """
    base = RngStream(spec.seed).child(index)
    data = simulate_dataset(spec, base.child(0))
    if spec.method == "ols":
        rep = ols_interaction_ttest(data, spec.alpha)
        return rep.statistic, rep.p_value, rep.reject
    grid = grid or spec.grid()
    cfg = InternalConfig(spec.k, spec.n_tilde, spec.n_mc, base.child(1))
    if spec.method == "projection":
        proj = ProjectionConfig(spec.r, spec.M, base.child(2))
        prep = run_projection_test(data, grid, spec.test_kind, spec.tree, cfg, proj, spec.alpha)
        return prep.theta_bar, prep.theta_bar, prep.reject
    rep = end_to_end_test(data, grid, spec.test_kind, spec.tree, cfg, spec.alpha)
    return rep.statistic, rep.p_value, rep.reject


def run_campaign(spec: SimSpec, threads: int | None = 1) -> SimResult:
    """Run ``spec.replications`` seeded replications; thread count does not change results."""
    spec.validate()
    grid = None if spec.method == "ols" else spec.grid()
    start = time.perf_counter()
    workers = threads or os.cpu_count() or 1
    indices = range(spec.replications)
    if workers == 1:
        results = [run_replication(spec, i, grid) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: run_replication(spec, i, grid), indices))
    wall = time.perf_counter() - start

    decisions = [bool(r[2]) for r in results]
    rejections = sum(decisions)
    rate = rejections / spec.replications
    return SimResult(
        rejection_rate=rate,
        replications=spec.replications,
        rejections=rejections,
        binomial_se=math.sqrt(rate * (1.0 - rate) / spec.replications),
        statistics=[float(r[0]) for r in results],
        p_values=[float(r[1]) for r in results],
        decisions=decisions,
        wall_time=wall,
        spec=spec.to_dict(),
    )


def table_models(table: int = 2, role: str | None = None) -> list[Model]:
    return [m for m in _MODELS if m.table == table and (role is None or m.role == role)]
