import numpy as np
import pytest

from graphrewire.graph import NAMED_GRAPHS, gen_er, gen_named


def er_graphs(count=50, n_max=20, seed=1234):
    """Connected ER graphs with n in [4, n_max] and p in [0.2, 0.7]."""
    rng = np.random.default_rng(seed)
    return [gen_er(int(rng.integers(4, n_max + 1)), float(rng.uniform(0.2, 0.7)), int(rng.integers(2 ** 31)))
            for _ in range(count)]


@pytest.fixture(scope="session")
def named():
    return {name: gen_named(name) for name in NAMED_GRAPHS}


@pytest.fixture(scope="session")
def random_graphs():
    return er_graphs()


@pytest.fixture(scope="session")
def test_graphs(named, random_graphs):
    return list(named.values()) + random_graphs


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
