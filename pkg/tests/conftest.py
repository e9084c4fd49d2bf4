import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Collect one PASS/FAIL line per acceptance criterion; printed in the summary."""
    def report(number, title, passed, detail=""):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number} ({title}): {detail}".rstrip(": ")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
