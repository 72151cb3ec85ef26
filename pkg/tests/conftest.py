from pathlib import Path

import pytest

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "src" / "ebikesim" / "scenarios"

_criteria = {}


@pytest.fixture
def scenario_dir():
    return SCENARIO_DIR


@pytest.fixture
def criterion(request):
    """Register the test as acceptance criterion ``request.param``-style label.

    Usage: ``criterion("7 step test")`` at the top of the test body.
    """

    def register(label):
        _criteria[request.node.nodeid] = label

    return register


def pytest_runtest_logreport(report):
    if report.when == "call" and report.nodeid in _criteria:
        _criteria[report.nodeid] = (_criteria[report.nodeid], report.outcome)
    elif report.when == "setup" and report.failed and report.nodeid in _criteria:
        _criteria[report.nodeid] = (_criteria[report.nodeid], "error")


def pytest_terminal_summary(terminalreporter):
    rows = [v for v in _criteria.values() if isinstance(v, tuple)]
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome in rows:
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  criterion {label}")
