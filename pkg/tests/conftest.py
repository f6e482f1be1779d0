import json
from pathlib import Path

import pytest

from _acceptance_log import LINES as ACCEPTANCE_LINES


@pytest.fixture(scope="session")
def oracle_values():
    return json.loads((Path(__file__).parent / "data" / "oracle_values.json").read_text())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
