import pytest

_REPORT = {}


@pytest.fixture
def report():
    """Record ``(criterion, passed, detail)``; printed in the terminal summary."""

    def record(criterion, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
        _REPORT.setdefault(criterion, []).append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_REPORT):
        for line in _REPORT[criterion]:
            terminalreporter.write_line(line)
