import numpy as np
import pytest

from additivity.numerics import RngStream
from additivity.tree import Dataset

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_log():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""

    def log(criterion: int, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion:2d}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return log


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def uniform_dataset(fn, n=300, d=2, sd=0.05, seed=0):
    gen = RngStream(seed).generator()
    x = gen.uniform(size=(n, d))
    return Dataset(x, fn(x) + sd * gen.standard_normal(n))


def random_spd(gen, n, cond=10.0):
    q, _ = np.linalg.qr(gen.standard_normal((n, n)))
    eig = np.exp(gen.uniform(0.0, np.log(cond), n))
    return (q * eig) @ q.T
