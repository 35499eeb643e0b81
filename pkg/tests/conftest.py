import numpy as np
import pytest

_CRITERIA = {}
_OUTCOMES = {}


def pytest_collection_modifyitems(config, items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            number, title = mark.args
            _CRITERIA[item.nodeid] = (int(number), title)


def pytest_runtest_logreport(report):
    if report.nodeid not in _CRITERIA:
        return
    current = _OUTCOMES.get(report.nodeid, "passed")
    if report.failed:
        current = "failed"
    elif report.skipped and current == "passed":
        current = "skipped"
    _OUTCOMES[report.nodeid] = current


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    grouped = {}
    for nodeid, outcome in _OUTCOMES.items():
        number, title = _CRITERIA[nodeid]
        grouped.setdefault((number, title), []).append((nodeid.split("::")[-1], outcome))
    terminalreporter.section("acceptance criteria")
    for (number, title), checks in sorted(grouped.items()):
        outcomes = {o for _, o in checks}
        verdict = "FAIL" if "failed" in outcomes else ("PASS" if "passed" in outcomes else "SKIP")
        detail = ", ".join(f"{name}={o}" for name, o in checks if o != "passed")
        line = f"criterion {number:2d} {verdict}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
