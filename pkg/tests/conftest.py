import numpy as np
import pytest

from groverlab.transpile import load_backend


@pytest.fixture(scope="session")
def vigo():
    return load_backend("vigo")


@pytest.fixture(scope="session")
def guadalupe():
    return load_backend("guadalupe")


def kron_all(mats):
    out = np.array([[1.0 + 0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
