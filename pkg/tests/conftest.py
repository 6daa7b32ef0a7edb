import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from pfmr.io import load_csv, read_table  # noqa: E402

# Lines recorded by the acceptance module, echoed in the terminal summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def crabs():
    return load_csv("crabs", "CW,FL,RW", "CL,BD")


@pytest.fixture(scope="session")
def crabs_labels():
    header, rows = read_table("crabs")
    g = header.index("group")
    s = header.index("sex")
    return (np.array([r[g] for r in rows]), np.array([r[s] for r in rows]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
