import pytest

from crosspole.config import load_params


@pytest.fixture(scope="session")
def pset():
    return load_params()


@pytest.fixture(scope="session")
def model(pset):
    return pset.model()


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in RESULTS:
        terminalreporter.write_line(line)
