import random

import pytest

from mcruntime import paillier as he


@pytest.fixture(scope="session")
def keys512():
    return he.keygen(he.TEST_KEY_BITS, random.Random(512))


@pytest.fixture
def rng():
    return random.Random(1234)


_criteria: dict[int, tuple[str, str, str]] = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, title = marker
    if report.when == "call" or report.failed:
        detail = dict(report.user_properties).get("detail", "")
        outcome = "PASS" if report.passed else "FAIL"
        if number not in _criteria or outcome == "FAIL":
            _criteria[number] = (outcome, title, detail)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        outcome, title, detail = _criteria[number]
        line = f"criterion {number:>2}: {outcome}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
