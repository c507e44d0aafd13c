import pytest

_ACCEPTANCE = []


@pytest.fixture
def verdict():
    """Record ``(criterion, passed, detail)``; the lines are printed after the run."""

    def record(criterion, passed, detail=""):
        _ACCEPTANCE.append((criterion, bool(passed), detail))
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {criterion}  {detail}")
