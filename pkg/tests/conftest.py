import pytest

from robinlayer.assembly import assemble_operators, build_grid
from robinlayer.model import BoundaryCoupling


@pytest.fixture
def bench():
    """Gaussian benchmark coupling."""
    return BoundaryCoupling.gauss(1.0, amplitude=0.5, sigma=1.0)


@pytest.fixture
def small_grid():
    return build_grid(2, 4.0, 41, 0.1, 6)


@pytest.fixture
def small_ops(small_grid, bench):
    return assemble_operators(small_grid, bench)


ACCEPTANCE = {}


def record(criterion, ok, detail):
    """Store one acceptance verdict; printed in the terminal summary."""
    ACCEPTANCE[criterion] = (bool(ok), detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
