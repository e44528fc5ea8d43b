from __future__ import annotations

from types import SimpleNamespace

import numpy as np
import pytest

from bvphc.poly import Polynomial, derivative


def zero_rhs_problem(alpha=0.0, beta=1.0, a=0.0, b=1.0):
    """Stand-in for ``y'' = 0``: the problem type requires degree >= 1."""
    zero = Polynomial([0.0])
    return SimpleNamespace(a=a, b=b, alpha=alpha, beta=beta, p=zero, dp=derivative(zero), degree=1,
                           mesh=None)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
