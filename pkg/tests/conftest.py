import pytest

_LINES = []


@pytest.fixture
def report():
    """Record one pass/fail line for an acceptance criterion, then assert it."""

    def _report(number: int, title: str, ok: bool, detail: str = ""):
        _LINES.append((number, f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title} {detail}".rstrip()))
        assert ok, detail

    return _report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_LINES):
            terminalreporter.write_line(line)
