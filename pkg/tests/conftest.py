import numpy as np
import pytest

from fedfair.engine import make_agents
from fedfair.losses import QuadraticLoss


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def toy_agents():
    """g1 = (theta - 1)^2, g2 = (theta + 1)^2 with p = (2, 2)."""
    return make_agents([QuadraticLoss((1.0,)), QuadraticLoss((-1.0,))], weights=[2.0, 2.0])


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """``report(n, ok, detail)`` logs one acceptance line and asserts ``ok``."""

    def _report(n: int, ok: bool, detail: str) -> None:
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
