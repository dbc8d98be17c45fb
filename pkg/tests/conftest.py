import warnings

import pytest

warnings.filterwarnings("ignore", message=".*TBB.*")


@pytest.fixture(scope="session")
def grids():
    from thetalam.geom import HalfDiskGrid

    cache = {}

    def get(n, radius=1.0):
        key = (n, radius)
        if key not in cache:
            cache[key] = HalfDiskGrid.build(n, radius)
        return cache[key]

    return get


# -- acceptance report: one PASS/FAIL line per criterion ----------------------------

_ACCEPTANCE = {}


def pytest_collection_modifyitems(config, items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            num, title = m.args
            _ACCEPTANCE.setdefault(num, {"title": title, "outcomes": [], "seconds": 0.0})
            item.user_properties.append(("criterion", num))


def pytest_runtest_logreport(report):
    nums = [v for k, v in report.user_properties if k == "criterion"]
    if not nums:
        return
    entry = _ACCEPTANCE[nums[0]]
    entry["seconds"] += report.duration
    if report.when == "call" or report.outcome != "passed":
        entry["outcomes"].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        e = _ACCEPTANCE[num]
        if not e["outcomes"]:
            status = "NOT RUN"
        elif all(o == "passed" for o in e["outcomes"]):
            status = "PASS"
        elif all(o == "skipped" for o in e["outcomes"]):
            status = "SKIPPED"
        else:
            status = "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} {status:<7} {e['title']} ({e['seconds']:.1f} s)")
