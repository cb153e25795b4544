import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call":
        return
    number, title = mark.args
    detail = getattr(item, "criterion_detail", "")
    if report.failed:
        msg = str(call.excinfo.value).strip().splitlines()
        detail = detail or (msg[0] if msg else call.excinfo.typename)
    _RESULTS[number] = ("PASS" if report.passed else "FAIL", title, report.duration, detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_RESULTS):
        status, title, duration, detail = _RESULTS[number]
        tr.write_line(f"{status} criterion {number}: {title} ({duration:.1f}s)"
                      + (f" | {detail}" if detail else ""))
