"""Collects acceptance-criterion outcomes and prints one line per criterion."""
import pytest

_outcomes: dict[int, dict] = {}


@pytest.fixture
def detail(request):
    """Attach a free-form note to the criterion line of the running test."""
    def add(text):
        request.node.user_properties.append(("detail", str(text)))
    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    entry = _outcomes.setdefault(n, {"title": title, "ok": True, "ran": False, "notes": []})
    if report.when == "call" or report.failed:
        entry["ran"] = True
        entry["ok"] = entry["ok"] and report.passed
    if report.when == "call":
        entry["notes"].extend(v for k, v in item.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_outcomes):
        e = _outcomes[n]
        status = ("PASS" if e["ok"] else "FAIL") if e["ran"] else "NOT RUN"
        tr.write_line(f"criterion {n:2d}: {status}  {e['title']}")
        for note in e["notes"]:
            tr.write_line(f"              {note}")
