import pytest

from logbm.sphere import build_grid

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def grid16():
    return build_grid(3, 16)


@pytest.fixture(scope="session")
def grid32():
    return build_grid(3, 32)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
