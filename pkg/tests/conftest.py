import numpy as np
import pytest

from transferlab.branch_maps import make_doubling_counterexample, make_gauss_system
from transferlab.function_space import build_grid, default_grid_size
from transferlab.spectral import leading_eigendata


@pytest.fixture(scope="session")
def gauss():
    return make_gauss_system()


@pytest.fixture(scope="session")
def doubling():
    return make_doubling_counterexample()


@pytest.fixture(scope="session")
def grid64():
    return build_grid(64)


@pytest.fixture(scope="session")
def gauss_spec(gauss, grid64):
    return leading_eigendata(gauss, 0.0, grid64)


@pytest.fixture(scope="session")
def grid50():
    return build_grid(default_grid_size(50.0))


@pytest.fixture(scope="session")
def gauss_spec50(gauss, grid50):
    return leading_eigendata(gauss, 0.0, grid50)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
