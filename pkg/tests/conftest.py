from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

# one verdict line per acceptance criterion, printed in the terminal summary
VERDICTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def verdict():
    def record(number: int, ok: bool, detail: str) -> None:
        VERDICTS[number] = (ok, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        ok, detail = VERDICTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
