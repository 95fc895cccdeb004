import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE: dict[str, str] = {}


@pytest.fixture
def record():
    """Record a one-line acceptance outcome printed at the end of the run."""

    def put(key: str, ok: bool, detail: str) -> None:
        ACCEPTANCE[key] = f"{key} {'PASS' if ok else 'FAIL'}  {detail}"

    return put


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
