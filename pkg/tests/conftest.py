import numpy as np
import pytest

from netid.fileio import six_node_network
from netid.netmodel import simulate_experiment

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def net_all():
    return six_node_network("all")


@pytest.fixture(scope="session")
def net_rb():
    return six_node_network("b")


@pytest.fixture(scope="session")
def data_5000(net_all):
    return simulate_experiment(net_all, 5000, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
