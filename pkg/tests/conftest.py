from fractions import Fraction

import pytest

from semiflex.core import Assignment, make_instance

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion reported in the summary")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    marker = getattr(report, "_criterion", None)
    if marker is None:
        return
    number, title = marker
    ok = report.passed
    previous = _criteria.get(number, (title, True))
    _criteria[number] = (title, previous[1] and ok)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report._criterion = marker.args


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok = _criteria[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {number}: {title}")


@pytest.fixture
def two_machine_trio():
    """Three unit apps, two machines with two memory slots each."""
    return make_instance([("1", 1, 1), ("2", 1, 1), ("3", 1, 1)], Q=2, fixed_m=2)


@pytest.fixture
def trio_split():
    # app 2 has an instance on each machine
    return Assignment.build([("1", 0, 1), ("2", 0, Fraction(1, 2)), ("2", 1, Fraction(1, 2)), ("3", 1, 1)], 2)


@pytest.fixture
def trio_whole():
    return Assignment.build([("1", 0, 1), ("2", 0, 1), ("3", 1, 1)], 2)


@pytest.fixture
def three_by_two():
    """Three apps p=2, q=1 on machines P=3, Q=2: two machines suffice only with splitting."""
    return make_instance([("a", 2, 1), ("b", 2, 1), ("c", 2, 1)], Q=2, P=3)


@pytest.fixture
def oversized():
    """Two memory-heavy apps and one app whose load exceeds a machine."""
    return make_instance([("a", 2, 2), ("b", 2, 2), ("c", 6, 1)], Q=3, P=5)


def ratio_family(n):
    return make_instance([(f"a{i:02d}", n, 1) for i in range(n)], Q=3, P=2 * n - 1)
