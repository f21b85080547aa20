import pytest

from channelstats.model import GroupSpec, PopulationSpec

_CRITERIA: list[str] = []


@pytest.fixture
def fruit():
    """Apples and oranges with a common unit variance."""
    return PopulationSpec((GroupSpec("apples", 0.25, 1.0), GroupSpec("oranges", 0.30, 1.0)))


@pytest.fixture
def apples():
    return PopulationSpec((GroupSpec("apples", 0.26, 0.0005),))


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion, then assert."""

    def check(label: str, ok: bool, detail: str = ""):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}" + (f" -- {detail}" if detail else "")
        _CRITERIA.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
