import sys

import numpy as np
import pytest

from gpconsensus.graph import builtin_topology, load_topology

X0_6 = np.array([1.0, 6.0, 8.0, 13.0, 15.0, 19.0])


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def p2():
    return builtin_topology("p2")


@pytest.fixture
def paper6():
    return builtin_topology("paper6")


def random_connected_topology(rng, m, p=0.35):
    """Random spanning tree plus extra edges with probability p."""
    order = rng.permutation(m) + 1
    edges = [(int(order[i]), int(order[rng.integers(0, i)])) for i in range(1, m)]
    for k in range(1, m + 1):
        for j in range(k + 1, m + 1):
            if rng.random() < p:
                edges.append((k, j))
    return load_topology(m, edges)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
