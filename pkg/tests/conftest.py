import pytest

ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collector for the acceptance table printed after the run."""
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
