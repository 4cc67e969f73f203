"""Shared fixtures and statistical helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest
from scipy import stats

from abcsmc import toy_model

KS_LEVEL = 0.001

# one verdict line per acceptance criterion, echoed after the test report
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def toy():
    return toy_model(10.0)


def ks_pvalue(a, b) -> float:
    return float(stats.ks_2samp(np.asarray(a).ravel(), np.asarray(b).ravel()).pvalue)


def assert_ks_pass(a, b, level: float = KS_LEVEL) -> None:
    p = ks_pvalue(a, b)
    assert p >= level, f"KS rejected: p={p:.3e} < {level}"
