import pytest

_LINES = []


@pytest.fixture
def report():
    """Record one acceptance verdict; all verdicts are repeated in the terminal summary."""

    def _report(number, title, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}  {detail}".rstrip()
        _LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
