"""Shared fixtures; collects acceptance verdicts for the terminal summary."""

import pytest

_VERDICTS = {}


@pytest.fixture
def verdict(capsys):
    """``verdict(n, ok, detail)`` records and prints one line per acceptance criterion."""
    def record(n, ok, detail):
        line = f"ACCEPTANCE criterion {n:>2}: {'PASS' if ok else 'FAIL'} - {detail}"
        _VERDICTS[n] = line
        with capsys.disabled():
            print("\n" + line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[n])
