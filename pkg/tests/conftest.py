import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sectoria import operator_core as oc

settings.register_profile(
    "sectoria", max_examples=12, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("sectoria")

# Acceptance tests append (number, passed, detail); printed after the run.
ACCEPTANCE_LINES: list = []


@pytest.fixture(scope="session")
def builtins():
    return oc.builtin_operators()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
