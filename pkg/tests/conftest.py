import pytest

from twogroup_mt import InitialFractions, ModelParams

# recurring parameter sets
ALPHA_HALF = (ModelParams(0.5, 1.0, 0.5, 0.8), InitialFractions(0.45, 0.5, 0.05, 0.0))
NEAR_BASIC = (ModelParams(0.99, 1.0, 1.0, 1.0), InitialFractions(0.99, 0.01, 0.0, 0.0))
SUBCRITICAL = (ModelParams(0.5, 1.0, 1.0, 0.0), InitialFractions(0.4, 0.5, 0.0, 0.1))
SYMMETRIC = (ModelParams(0.5, 1.0, 1.0, 1.0), InitialFractions(0.49, 0.5, 0.01, 0.0))


@pytest.fixture
def alpha_half():
    return ALPHA_HALF


@pytest.fixture
def near_basic():
    return NEAR_BASIC


# one summary line per acceptance criterion, built from the outcomes of the
# tests carrying ``@pytest.mark.criterion(number, title)``
_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    number, title = mark.args
    entry = _criteria.setdefault(number, {"title": title, "failed": [], "passed": 0})
    if rep.failed:
        entry["failed"].append(item.name)
    elif rep.when == "call" and rep.passed:
        entry["passed"] += 1


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        status = "FAIL" if e["failed"] else "PASS"
        detail = f" (failed: {', '.join(e['failed'])})" if e["failed"] else ""
        terminalreporter.write_line(f"criterion {number}: {status}  {e['title']}{detail}")
