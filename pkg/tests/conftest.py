import numpy as np
import pytest

from stealthcurve.lti import ClosedLoop, FirstOrderPlant, OpenLoop, RationalTransferFunction
from stealthcurve.spectra import FrequencyGrid

ACCEPTANCE_LINES = []


@pytest.fixture
def grid():
    return FrequencyGrid(4096)


@pytest.fixture
def ar1_model():
    # S_y(w) = 0.75 / (1.25 - cos w): unit-variance AR(1) output
    return OpenLoop(FirstOrderPlant(a=0.5, b=1.0, c=1.0, sigma_w2=0.75, sigma_v2=0.0))


@pytest.fixture
def deadbeat_model():
    # closed-loop pole at the origin, S_y == 1
    return ClosedLoop(
        FirstOrderPlant(a=0.5, b=1.0, c=1.0, sigma_w2=1.0, sigma_v2=0.0),
        RationalTransferFunction.constant(0.5),
    )


@pytest.fixture
def dynamic_loop_model():
    # unstable plant stabilized by a first-order controller, with sensor noise
    return ClosedLoop(
        FirstOrderPlant(a=1.2, b=1.0, c=1.0, sigma_w2=1.0, sigma_v2=0.2),
        RationalTransferFunction((0.8, 0.1), (1.0, -0.3)),
    )


def ar1_closed_form(grid, a=0.5, innovation_var=0.75):
    return innovation_var / (1.0 + a * a - 2.0 * a * np.cos(grid.omega))


def record_acceptance(line):
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
