import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    number, title = mark.args
    passed = call.excinfo is None
    detail = getattr(item, "criterion_detail", "")
    prev = _CRITERIA.get(number)
    ok = passed and (prev is None or prev[1])
    _CRITERIA[number] = (title, ok, detail or (prev[2] if prev else ""), call.duration + (prev[3] if prev else 0.0))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, detail, secs = _CRITERIA[number]
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}  ({secs:.1f} s)"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)


@pytest.fixture
def detail(request):
    """Attach a short note to the acceptance summary line of this test."""

    def set_detail(text):
        request.node.criterion_detail = text

    return set_detail
