import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fracmono import GridSpec, Pipeline, default_spec  # noqa: E402

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":ab+-"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def default_pipe():
    return Pipeline.from_spec(default_spec())


@pytest.fixture(scope="session")
def pipe41():
    # 41 box nodes, 19 interior, 6 measured
    return Pipeline.from_spec(default_spec(box_radius=2.0, spacing=0.1))


@pytest.fixture(scope="session")
def tiny_spec():
    # 21 box nodes
    return GridSpec(-1.0, 1.0, 0.2, 0.5, ((-1.6, -1.2), (1.2, 1.6)), box_radius=2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def scenario_dir():
    return SCENARIOS
