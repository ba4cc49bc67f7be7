"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

import pytest

_criteria: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    number, title = mark.args
    entry = _criteria.setdefault(number, {"title": title, "passed": True, "ran": 0, "details": []})
    if rep.skipped:
        return
    entry["ran"] += 1
    entry["passed"] &= rep.passed
    for key, value in rep.user_properties:
        if key == "detail":
            entry["details"].append(("" if rep.passed else "[fail] ") + str(value))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        status = "SKIP" if entry["ran"] == 0 else ("PASS" if entry["passed"] else "FAIL")
        tr.write_line(f"C{number:<3d}{status}  {entry['title']}")
        for d in entry["details"]:
            tr.write_line(f"         {d}")
