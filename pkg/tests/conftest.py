import numpy as np
import pytest

from poisson_rigidity.backends import make_backend


def random_scalar_coef(backend, rng, max_degree=4, min_degree=0):
    mask = (backend.deg0 >= min_degree) & (backend.deg0 <= max_degree)
    return np.where(mask, rng.standard_normal(backend.n0), 0.0)


def random_oneform_coef(backend, rng, max_degree=4):
    return np.where(backend.deg1 <= max_degree, rng.standard_normal(backend.n1), 0.0)


@pytest.fixture(scope="session")
def torus16():
    return make_backend("torus2", 16)


@pytest.fixture(scope="session")
def sphere16():
    return make_backend("sphere2", 16)


@pytest.fixture(scope="session")
def sphere8():
    return make_backend("sphere2", 8)


@pytest.fixture(scope="session")
def sphere12():
    return make_backend("sphere2", 12)


@pytest.fixture(scope="session", params=["torus2", "sphere2"])
def backend16(request):
    return make_backend(request.param, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
