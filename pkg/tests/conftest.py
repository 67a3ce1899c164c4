import sys
import warnings

import numpy as np
import pytest

from stecnn.numerics.tensor import Tensor, reset_tape


def t64(a, grad=False):
    return Tensor(np.asarray(a, dtype=np.float64), requires_grad=grad, dtype=np.float64)


@pytest.fixture(autouse=True)
def _fresh_tape():
    reset_tape()
    yield
    reset_tape()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is not None and acceptance.RESULTS:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in acceptance.summary_lines():
            terminalreporter.write_line(line)
