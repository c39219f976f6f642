import math
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

LN2 = math.log(2.0)
# two-atom instance used throughout: fair source, skewed target, 0/1 cost
FIXTURE_Q = np.array([0.5, 0.5])
FIXTURE_P = np.array([0.75, 0.25])
HAMMING2 = np.array([[0.0, 1.0], [1.0, 0.0]])


@pytest.fixture
def fixture_instance():
    return FIXTURE_Q, FIXTURE_P, HAMMING2


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
