import numpy as np
import pytest

from orpf.grid import build_grid, green_matrix
from orpf.network_io import load_bundled
from orpf.powerflow import ScenarioSpec

Z1 = 0.1 + 0.05j
Z2 = 0.2 + 0.1j


@pytest.fixture
def path3():
    grid = build_grid([0, 1, 2], [(0, 1, Z1), (1, 2, Z2)])
    return grid, green_matrix(grid)


@pytest.fixture
def path3_scenario():
    return ScenarioSpec(230.0, np.array([0, -1000 - 500j, 0]), np.zeros(3))


@pytest.fixture(scope="session")
def testbed():
    return load_bundled("ieee37_like")


@pytest.fixture(scope="session")
def three_node():
    return load_bundled("three_node")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split(" AC")[1].split()[0])):
        terminalreporter.write_line(line)
