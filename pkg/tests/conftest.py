import pytest

_LINES: dict[int, str] = {}


@pytest.fixture
def record_criterion():
    """Store the one-line verdict for an acceptance criterion."""

    def record(number: int, line: str) -> None:
        _LINES[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(_LINES):
            terminalreporter.write_line(_LINES[n])
