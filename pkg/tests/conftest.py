import numpy as np
import pytest

from nsc import config, lds


@pytest.fixture(scope="session")
def instance():
    """The (3, 2, kappa=2, gamma=0.3) instance used throughout the scaling tests."""
    return lds.synth_stable_instance(3, 2, 2.0, 0.3, seed=1)


@pytest.fixture(scope="session")
def base_cfg():
    return config.from_dict({"dims": [3, 2], "kappa": 2, "gamma": 0.3, "k": 3, "T": 2000,
                             "W": 1, "G": 2, "delta": 0.1, "seed": 0})


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
