"""Shared fixtures and helpers, plus the acceptance criteria summary."""

from __future__ import annotations

from pathlib import Path

import pytest

from lockhound.trace import Trace, normalize
from lockhound.traceio import parse_trace

FIXTURES = Path(__file__).parent / "fixtures"


def load(name: str) -> Trace:
    return normalize(parse_trace(FIXTURES / f"{name}.trace"))


def ev(trace: Trace, row: int) -> int:
    """Event id of the given input line (figure event number)."""
    return trace.at_row(row)


def named(trace: Trace, ls) -> set[tuple[str, str]]:
    return set(trace.named(ls))


def expand_witness(trace: Trace, rows: list[int]) -> list[int]:
    """Figure-style witness (input rows) as event ids.

    Synthetic events that normalization put directly before a listed event in
    its thread (implicit requests, fork reads) are inserted in front of it.
    """
    out: list[int] = []
    taken: set[int] = set()
    for r in rows:
        e = trace.at_row(r)
        ids = trace.thread_events[trace[e].thread]
        pos = trace.local[e] - 1
        lead = []
        while pos > 0 and trace[ids[pos - 1]].synthetic and ids[pos - 1] not in taken:
            lead.append(ids[pos - 1])
            pos -= 1
        for x in reversed(lead):
            out.append(x)
            taken.add(x)
        out.append(e)
        taken.add(e)
    return out


@pytest.fixture
def fixture_trace():
    return load


# acceptance criteria: one PASS/FAIL line each at the end of the run

CRITERIA = {
    1: "figure-fixture regression",
    2: "lock-set point checks",
    3: "oracle differential suite",
    4: "performance smoke",
    5: "idempotence and round-trip",
}
_outcomes: dict[int, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion the test belongs to")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    n = getattr(report, "criterion", None)
    if n is not None:
        _outcomes.setdefault(n, []).append(report.outcome == "passed")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        rep.criterion = mark.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        results = _outcomes.get(n)
        if results is None:
            status = "NOT RUN"
        else:
            status = "PASS" if all(results) else "FAIL"
        count = f"({sum(results)}/{len(results)} checks)" if results else ""
        terminalreporter.write_line(f"criterion {n} {title}: {status} {count}".rstrip())
