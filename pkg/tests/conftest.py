from pathlib import Path

import pytest

from heatlq import load_spec
from heatlq.riccati import solve_spec

ROOT = Path(__file__).resolve().parents[1]
DEFAULT_CONFIG = ROOT / "configs" / "paper_sec7.json"

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def base_spec():
    return load_spec(DEFAULT_CONFIG)


@pytest.fixture(scope="session")
def base_sol(base_spec):
    return solve_spec(base_spec)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
