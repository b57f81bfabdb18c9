import os

import pytest

ACCEPTANCE_LINES: list[str] = []


def pytest_collection_modifyitems(config, items):
    if os.environ.get("TOPOHEDGE_FULL_SCALE") == "1":
        return
    skip = pytest.mark.skip(reason="set TOPOHEDGE_FULL_SCALE=1 to run")
    for item in items:
        if "full_scale" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
