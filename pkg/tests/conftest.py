import pytest

from cpsdefend.scenarios import golden
from cpsdefend.sim import run_scenario

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    n, text = marker.args
    key = (n, item.name)
    _criteria[key] = (text, rep.passed, getattr(item, "criterion_detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for (n, _), (text, passed, detail) in sorted(_criteria.items()):
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] {n}: {text}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture
def detail(request):
    """Attach a one-line measurement to the criterion report."""
    def record(msg):
        request.node.criterion_detail = msg
    return record


_runs = {}


@pytest.fixture(scope="session")
def golden_run():
    """Cached golden-scenario runs keyed by (name, ids, compensation)."""
    def get(name, ids=True, compensation=True):
        key = (name, ids, compensation)
        if key not in _runs:
            s = golden(name).scenario.with_toggles(ids=ids, compensation=compensation)
            _runs[key] = run_scenario(s)
        return _runs[key]
    return get
