import numpy as np
import pytest
from hypothesis import settings

from ddgpce.distributions import Marginal, RandomInputModel

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")


@pytest.fixture
def gauss3():
    return RandomInputModel.equicorrelated(
        [Marginal.normal(1.0, 0.5), Marginal.normal(-2.0, 1.0), Marginal.normal(0.5, 0.25)], 0.5
    )


@pytest.fixture
def mixed4():
    marg = [Marginal.uniform(-1.0, 3.0), Marginal.normal(0.0, 2.0), Marginal.lognormal(1.0, 0.2),
            Marginal.lognormal(2.0, 0.1)]
    R = np.eye(4)
    R[2, 3] = R[3, 2] = 0.5
    R[1, 2] = R[2, 1] = 0.3
    return RandomInputModel(tuple(marg), R)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
