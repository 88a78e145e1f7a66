import pytest

_RESULTS = {}


@pytest.fixture
def report(request):
    """Attach a detail line (and optionally an explicit status) to the criterion report."""
    def add(detail, status=None):
        request.node.user_properties.append(("detail", detail))
        if status is not None:
            request.node.user_properties.append(("status", status))
    return add


def pytest_runtest_logreport(report):
    marks = getattr(report, "_acceptance", None)
    if marks is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        props = dict(report.user_properties)
        details = [v for k, v in report.user_properties if k == "detail"]
        status = props.get("status", "PASS" if report.passed else "FAIL")
        _RESULTS[marks] = (status, details, report.duration)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("acceptance")
    if m is not None:
        rep._acceptance = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for (num, title), (status, details, secs) in sorted(_RESULTS.items()):
        tr.write_line(f"criterion {num} {status}: {title} ({secs:.1f} s)")
        for d in details:
            tr.write_line(f"    {d}")
