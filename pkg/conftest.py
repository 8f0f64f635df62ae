import logging

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


@pytest.fixture
def dependent_pair(rng):
    """x and a noisy non-linear function of x, L=40."""
    x = rng.standard_normal(40)
    y = np.abs(x) + 0.3 * rng.standard_normal(40)
    return x, y


@pytest.fixture(autouse=True)
def restore_root_logger():
    # udep.setup_logging replaces the root handlers
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    for h in root.handlers:
        if h not in handlers:
            h.close()
    root.handlers[:] = handlers
    root.setLevel(level)


def pytest_addoption(parser):
    parser.addoption("--update-golden", action="store_true",
                     help="Rewrite the frozen result files under testdata/")


@pytest.fixture
def update_golden(request):
    return request.config.getoption("--update-golden")
