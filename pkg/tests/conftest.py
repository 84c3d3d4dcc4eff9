from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"

# one line per acceptance criterion, echoed again at the end of the session
ACCEPTANCE_LINES = []


@pytest.fixture
def scenario_path():
    def get(name):
        return SCENARIOS / f"{name}.json"

    return get


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
