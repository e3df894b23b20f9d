"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

import pytest

_outcomes: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = tuple(marker.args)


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, title = marker
    entry = _outcomes.setdefault(number, {"title": title, "ok": True, "ran": False, "notes": []})
    if report.when == "call":
        entry["ran"] = True
        entry["notes"].extend(f"{k}={v}" for k, v in report.user_properties)
    if report.failed:
        entry["ok"] = False
        entry["notes"].append(f"{report.nodeid.split('::')[-1]} failed")
    elif report.skipped:
        entry["ok"] = False
        entry["notes"].append(f"{report.nodeid.split('::')[-1]} skipped")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        e = _outcomes[number]
        status = "PASS" if e["ok"] and e["ran"] else "FAIL"
        line = f"{status} criterion {number}: {e['title']}"
        if e["notes"]:
            line += f"  ({'; '.join(e['notes'])})"
        terminalreporter.write_line(line)
