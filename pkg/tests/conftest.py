from __future__ import annotations

import pytest

from pnclab.gf import GF
from pnclab.schedule import GenerateEvent, Head, Schedule, TransmitEvent, gen_line


def line_schedule(k: int, send_ticks, l: int = 2) -> Schedule:
    """Node 0 holds all k messages at tick 0 and sends to node 1 at each tick."""
    events = [GenerateEvent(m, ((0, 0),)) for m in range(k)]
    events += [TransmitEvent(0, t, (Head(1, 1),)) for t in send_ticks]
    return Schedule(2, k, l, tuple(events))


@pytest.fixture
def example_a() -> Schedule:
    # a=0, b=1; two messages at a; a -> b at ticks 1, 2, 3 with delay 1
    return gen_line(2, 2, 3, l=2)


@pytest.fixture
def example_b() -> Schedule:
    # two messages at a, sends at ticks 1 and 2; interesting with mu = 1
    return line_schedule(2, [1, 2])


@pytest.fixture(scope="session")
def gf16() -> GF:
    return GF(4)


@pytest.fixture(scope="session")
def gf256() -> GF:
    return GF(8)


@pytest.fixture(scope="session")
def gf65536() -> GF:
    return GF(16)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
