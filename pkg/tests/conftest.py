import numpy as np
import pytest

from fednorm.problems import QuadraticSaddle


def mismatch_problem():
    return QuadraticSaddle(
        A=[[[1.0]], [[2.0]]], B=[[[1.0]], [[1.0]]], c=[[1.0], [-1.0]], e=[[0.0], [0.0]], mu=1.0
    )


def scalar_problem(A=1.0, B=1.0, c=0.0, e=0.0, mu=1.0):
    return QuadraticSaddle([[[A]]], [[[B]]], [[c]], [[e]], mu)


@pytest.fixture
def mismatch():
    return mismatch_problem()


@pytest.fixture
def rng():
    return np.random.default_rng(0)


# --- acceptance report ---------------------------------------------------------

CRITERIA = []


def record_criterion(label, ok, detail):
    """Remember one acceptance outcome; printed in the terminal summary."""
    CRITERIA.append((label, bool(ok), detail))
    return ok


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in sorted(CRITERIA, key=lambda c: c[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
