import numpy as np
import pytest

from comtraq.dynamics import DynamicsParams
from comtraq.mpc import ReferenceTrajectory
from comtraq.tasks import TaskSpec


def straight_line(n=100, spacing=0.1):
    return ReferenceTrajectory(np.column_stack([np.arange(n) * spacing, np.zeros(n)]))


@pytest.fixture
def line_task():
    return TaskSpec(straight_line(60), budget=5, name="line")


@pytest.fixture
def fast_params():
    # Allows the unit-speed examples without speed clamping.
    return DynamicsParams(v_max=2.0)


_CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_CRITERIA] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, ok, detail)``."""
    results = request.config.stash[_CRITERIA]

    def record(n, ok, detail=""):
        results[n] = (bool(ok), detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_CRITERIA, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
