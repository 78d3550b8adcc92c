import numpy as np
import pytest

from asgl_qr.data import Dataset, GroupStructure


def make_data(n=40, p=6, seed=0, noise=1.0, beta=None):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    if beta is None:
        beta = np.zeros(p)
        beta[: min(2, p)] = (2.0, -1.5)[: min(2, p)]
    y = X @ beta + noise * rng.standard_normal(n)
    return Dataset(X, y)


@pytest.fixture
def small():
    return make_data()


@pytest.fixture
def groups6():
    return GroupStructure.contiguous([2, 2, 2])


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
