from __future__ import annotations

import pytest

_LINES: dict[int, str] = {}


@pytest.fixture
def report():
    """Record the PASS/FAIL line of one acceptance criterion and return the verdict."""

    def emit(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _LINES[number] = line
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_LINES):
            terminalreporter.write_line(_LINES[number])
