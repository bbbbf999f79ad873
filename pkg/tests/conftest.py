import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def detail(request):
    """Attach a short result summary to the test's criterion line."""
    def note(text):
        request.node.user_properties.append(("detail", text))
    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when == "teardown" and rep.passed):
        return
    number, title = mark.args
    prev = _RESULTS.get(number)
    details = list(prev[3]) if prev else []
    if rep.when == "call":
        details += [v for k, v in item.user_properties if k == "detail"]
    passed = rep.passed and (prev is None or prev[0])
    duration = rep.duration + (prev[2] if prev else 0.0)
    _RESULTS[number] = (passed, title, duration, details)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_RESULTS):
        passed, title, duration, details = _RESULTS[number]
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {title}  ({duration:.1f} s)"
        if details:
            line += "  " + "; ".join(details)
        tr.write_line(line)
