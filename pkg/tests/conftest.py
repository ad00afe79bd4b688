import numpy as np
import pytest

from graphgp.graph import Graph, random_graph


@pytest.fixture
def path2():
    return Graph(np.array([[0.0, 1.0], [1.0, 0.0]]))


@pytest.fixture(scope="session")
def sensor30():
    return random_graph("sensor", {"n": 30}, seed=0)


def random_connected_graph(rng, M, density=0.5):
    """Random weighted graph on ``M`` nodes with a spanning path so it is connected."""
    W = np.triu(rng.uniform(0.1, 1.0, (M, M)) * (rng.uniform(size=(M, M)) < density), 1)
    W[np.arange(M - 1), np.arange(1, M)] = rng.uniform(0.1, 1.0, M - 1)
    return Graph(W + W.T)


def random_psd(rng, n, rank=None):
    A = rng.standard_normal((n, rank or n))
    S = A @ A.T
    return 0.5 * (S + S.T)


ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance():
    """Record one verdict line per acceptance criterion."""

    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
