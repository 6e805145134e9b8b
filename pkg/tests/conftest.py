"""Per-criterion PASS/FAIL reporting for the acceptance suite.

Tests tagged ``@pytest.mark.criterion(n, "description")`` are grouped by
``n``; a criterion passes when every tagged test passed. Tests can attach
measured numbers to the report through the ``criterion_note`` fixture.
"""

from __future__ import annotations

import pytest

_RESULTS: dict[int, dict] = {}


def _entry(marker) -> dict:
    n, desc = marker.args
    return _RESULTS.setdefault(n, {"desc": desc, "outcomes": [], "notes": []})


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _entry(marker)["outcomes"].append(rep.outcome)


@pytest.fixture
def criterion_note(request):
    marker = request.node.get_closest_marker("criterion")
    if marker is None:
        raise RuntimeError("criterion_note needs a test marked with @pytest.mark.criterion")
    notes = _entry(marker)["notes"]
    return lambda text: notes.append(text)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        e = _RESULTS[n]
        if "failed" in e["outcomes"]:
            status = "FAIL"
        elif e["outcomes"] and all(o == "passed" for o in e["outcomes"]):
            status = "PASS"
        else:
            status = "SKIP"
        terminalreporter.write_line(f"{status} criterion {n}: {e['desc']}")
        for note in e["notes"]:
            terminalreporter.write_line(f"    {note}")
