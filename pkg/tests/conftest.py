import numpy as np
import pytest

from pllay.data import GridFunction, PointCloud


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_grid(rng, w, h, domain=((0.0, 0.0), (1.0, 1.0))):
    return GridFunction(w, h, rng.random(w * h), domain)


def random_cloud(rng, n, d=2):
    return PointCloud(rng.random((n, d)))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
