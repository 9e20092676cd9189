import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_outcomes = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    if report.when == "call" or report.failed:
        # a setup failure or a failing call overrides an earlier pass
        if report.failed or name not in _outcomes:
            _outcomes[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import CRITERIA
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for name, label in CRITERIA.items():
        terminalreporter.write_line(f"{_outcomes.get(name, 'NOT RUN'):7} {label}")
