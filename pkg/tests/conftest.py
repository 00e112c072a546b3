import numpy as np
import pytest
from hypothesis import settings

from stationary_light.model import PAPER_OMEGA, paper_params

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

# r_bright = d G W^2 / D^2 at d = 200, G = 2pi 3, W = 2pi 2.4, D = 2pi 160
R_BRIGHT_PAPER = 0.848230016469244
# gamma0 + 2 G W^2 / D^2, in 1/us
GAMMA_SL_PAPER = 0.011623892818282235


@pytest.fixture
def paper():
    return paper_params()


@pytest.fixture
def omega():
    return PAPER_OMEGA


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
