import math
from pathlib import Path

import mpmath
import pytest

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"


def dd_direct_sum(xs, beta, dps=60):
    """Oracle for distinct inputs: sum_j f(x_j) / prod_{k != j} (x_j - x_k), f = exp(-beta x)."""
    with mpmath.workdps(dps):
        xs = [mpmath.mpf(x) for x in xs]
        total = mpmath.mpf(0)
        for j, xj in enumerate(xs):
            den = mpmath.mpf(1)
            for k, xk in enumerate(xs):
                if k != j:
                    den *= xj - xk
            total += mpmath.exp(-beta * xj) / den
        return float(total)


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def chain3_path():
    return DATA / "chain3.txt"


def rel_err(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


PI = math.pi


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
