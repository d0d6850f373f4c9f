import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import time

import pytest

from airpid.ppo import PpoHyperparams, train
from airpid.simenv import DroneEnv, SimConfig

GOLDEN_SEED = 0


@pytest.fixture(scope="session")
def golden_run(tmp_path_factory):
    """The golden-seed 20,000-step training run, shared across test files."""
    out = tmp_path_factory.mktemp("golden")
    start = time.perf_counter()
    params, report = train(lambda: DroneEnv(SimConfig(seed=GOLDEN_SEED)), PpoHyperparams(seed=GOLDEN_SEED),
                           out_dir=str(out))
    return params, report, time.perf_counter() - start, out


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
