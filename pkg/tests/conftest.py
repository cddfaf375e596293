import os

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=50)
settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_RESULTS: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        number, title = mark.args
        detail = dict(rep.user_properties).get("detail", "")
        prev = _RESULTS.get(number)
        ok = rep.passed and (prev is None or prev[1])
        joined = "; ".join(d for d in ((prev[2] if prev else ""), detail) if d)
        _RESULTS[number] = (title, ok, joined)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, ok, detail = _RESULTS[number]
        line = f"criterion {number:>2}  {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
