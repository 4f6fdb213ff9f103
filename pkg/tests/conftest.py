import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gridid.gridsim import build_scenario, sample_dataset, simulate

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

SMIB_TRUE = {"fast": (0.2, 0.15, 0.2), "medium": (0.4, 0.15, 0.2), "slow": (0.8, 0.15, 0.2)}


@pytest.fixture(scope="session")
def smib_traj():
    return simulate(build_scenario("smib", "fast"), None, -0.1, 5.0)


@pytest.fixture(scope="session")
def smib_data(smib_traj):
    return sample_dataset(smib_traj, 20.0, 5.0)


@pytest.fixture(scope="session")
def smib_slow_data():
    return sample_dataset(simulate(build_scenario("smib", "slow"), None, -0.1, 5.0), 20.0, 5.0)


@pytest.fixture(scope="session")
def bus3_data():
    return sample_dataset(simulate(build_scenario("bus3", "fast"), None, -0.1, 5.0), 20.0, 5.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def transfer_118():
    """SMIB-slow pretraining (1000 iterations) transferred to the 118-bus fast case."""
    from gridid.harness import ExperimentConfig, run_transfer
    grid = sorted(set(range(0, 2001, 100)))
    return run_transfer(("smib", "slow"), 1000, ExperimentConfig(grid="ieee118", dynamics="fast"),
                        grid)


ACCEPTANCE_LINES = []


def report(tag, ok, detail):
    """Record one acceptance verdict; all of them are echoed in the summary."""
    line = f"{tag} {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
