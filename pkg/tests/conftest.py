import numpy as np
import pytest

from treecoca.data import synth_gaussian
from treecoca.losses import LossSpec


@pytest.fixture
def ridge_toy():
    """5 x 8 ridge instance used across the suite."""
    return synth_gaussian(5, 8, 7, 0.5)


@pytest.fixture
def hinge_toy():
    return synth_gaussian(5, 8, 3, 0.1, LossSpec.smooth_hinge(1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one PASS/FAIL line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
