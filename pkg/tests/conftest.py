"""Collects results of tests marked ``criterion(n, title)`` and prints one
PASS/FAIL/SKIP line per acceptance criterion at the end of the run."""

import pytest

_results: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _results.setdefault(number, {"title": title, "outcomes": [], "notes": []})
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        entry["outcomes"].append(report.outcome)
        for name, text in report.user_properties:
            if name == "measured":
                entry["notes"].append(text)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        entry = _results[number]
        outcomes = entry["outcomes"]
        if "failed" in outcomes:
            verdict = "FAIL"
        elif "passed" in outcomes:
            verdict = "PASS"
        else:
            verdict = "SKIP"
        notes = "; ".join(entry["notes"])
        line = f"criterion {number:>2} {verdict}  {entry['title']}"
        terminalreporter.write_line(line + (f"  [{notes}]" if notes else ""))
