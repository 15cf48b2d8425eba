import numpy as np
import pytest

import acceptance_log
from plapfraud.checks import random_graph
from plapfraud.graph import build_graph


def pytest_terminal_summary(terminalreporter):
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def path3():
    """Path 0 - 1 - 2 with unit weights."""
    return build_graph(3, [(0, 1, 1.0), (1, 2, 1.0)])


@pytest.fixture
def rng():
    return np.random.default_rng(20180521)


@pytest.fixture
def random_graphs():
    def make(seed, count, n_max=50):
        r = np.random.default_rng(seed)
        return [random_graph(r, n_max=n_max) for _ in range(count)]
    return make
