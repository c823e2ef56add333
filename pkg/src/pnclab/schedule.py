"""Communication schedules and their time-expanded hypergraphs.

A schedule is a list of transmit and generate events on integer ticks.
:func:`build_hypergraph` turns it into vertex copies ``(node, tick)`` plus
one hyperedge per transmission and one supersource hyperedge per message.
"""

from __future__ import annotations

import json
import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Union


class InvalidSchedule(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations) or "invalid schedule")


class VertexCopy(NamedTuple):
    node: int
    time: int

    @property
    def is_source(self) -> bool:
        return self.node < 0

    def __str__(self) -> str:
        return "s" if self.is_source else f"{self.node}@{self.time}"


SUPERSOURCE = VertexCopy(-1, -1)


@dataclass(frozen=True)
class Head:
    to: int
    delay: int


@dataclass(frozen=True)
class TransmitEvent:
    sender: int
    time: int
    heads: tuple[Head, ...]

    def to_json(self) -> dict:
        return {
            "type": "transmit",
            "sender": self.sender,
            "time": self.time,
            "heads": [{"to": h.to, "delay": h.delay} for h in self.heads],
        }


@dataclass(frozen=True)
class GenerateEvent:
    message: int
    origins: tuple[tuple[int, int], ...]  # (node, tick)

    def to_json(self) -> dict:
        return {
            "type": "generate",
            "message": self.message,
            "origins": [{"node": u, "time": t} for u, t in self.origins],
        }


Event = Union[TransmitEvent, GenerateEvent]


@dataclass(frozen=True)
class Schedule:
    n: int
    k: int
    l: int  # noqa: E741
    events: tuple[Event, ...]
    meta: dict | None = field(default=None, compare=False)

    def transmissions(self) -> Iterable[tuple[int, TransmitEvent]]:
        for i, ev in enumerate(self.events):
            if isinstance(ev, TransmitEvent):
                yield i, ev

    def generations(self) -> Iterable[tuple[int, GenerateEvent]]:
        for i, ev in enumerate(self.events):
            if isinstance(ev, GenerateEvent):
                yield i, ev

    def to_json(self) -> dict:
        doc = {"n": self.n, "k": self.k, "l": self.l, "events": [e.to_json() for e in self.events]}
        if self.meta is not None:
            doc["meta"] = self.meta
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Schedule":
        return parse_schedule(json.loads(text))


class ScheduleFormatError(ValueError):
    pass


def _check_keys(obj, required: set, optional: set = frozenset(), where: str = "schedule") -> None:
    if not isinstance(obj, dict):
        raise ScheduleFormatError(f"{where}: expected an object")
    keys = set(obj)
    if keys - required - optional:
        raise ScheduleFormatError(f"{where}: unknown fields {sorted(keys - required - optional)}")
    if required - keys:
        raise ScheduleFormatError(f"{where}: missing fields {sorted(required - keys)}")


def _int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScheduleFormatError(f"{where}: expected an integer, got {v!r}")
    return v


def parse_schedule(doc: dict) -> Schedule:
    """Parse the JSON schedule document; unknown fields are rejected."""
    _check_keys(doc, {"n", "k", "l", "events"}, {"meta"})
    events: list[Event] = []
    if not isinstance(doc["events"], list):
        raise ScheduleFormatError("events: expected a list")
    for i, ev in enumerate(doc["events"]):
        where = f"events[{i}]"
        if not isinstance(ev, dict) or "type" not in ev:
            raise ScheduleFormatError(f"{where}: missing type")
        if ev["type"] == "transmit":
            _check_keys(ev, {"type", "sender", "time", "heads"}, where=where)
            heads = []
            for j, h in enumerate(ev["heads"]):
                _check_keys(h, {"to", "delay"}, where=f"{where}.heads[{j}]")
                heads.append(Head(_int(h["to"], where), _int(h["delay"], where)))
            events.append(TransmitEvent(_int(ev["sender"], where), _int(ev["time"], where), tuple(heads)))
        elif ev["type"] == "generate":
            _check_keys(ev, {"type", "message", "origins"}, where=where)
            origins = []
            for j, o in enumerate(ev["origins"]):
                _check_keys(o, {"node", "time"}, where=f"{where}.origins[{j}]")
                origins.append((_int(o["node"], where), _int(o["time"], where)))
            events.append(GenerateEvent(_int(ev["message"], where), tuple(origins)))
        else:
            raise ScheduleFormatError(f"{where}: unknown event type {ev['type']!r}")
    meta = doc.get("meta")
    if meta is not None and not isinstance(meta, dict):
        raise ScheduleFormatError("meta: expected an object")
    return Schedule(_int(doc["n"], "n"), _int(doc["k"], "k"), _int(doc["l"], "l"), tuple(events), meta)


# validation


@dataclass(frozen=True)
class Violation:
    kind: str
    args: tuple

    def __str__(self) -> str:
        return f"{self.kind}({', '.join(map(str, self.args))})"


def validate(s: Schedule) -> list[Violation]:
    """Every violation of the model assumptions; an empty list means ok."""
    out: list[Violation] = []
    if s.n < 1:
        out.append(Violation("BadParameter", ("n", s.n)))
    if s.k < 0:
        out.append(Violation("BadParameter", ("k", s.k)))
    if s.l < 0:
        out.append(Violation("BadParameter", ("l", s.l)))

    def node_ok(u, i) -> bool:
        if not 0 <= u < s.n:
            out.append(Violation("NodeOutOfRange", (i, u)))
            return False
        return True

    sends: dict[int, set[int]] = defaultdict(set)
    receives: dict[int, set[int]] = defaultdict(set)
    generated: set[int] = set()
    seen_origins: set[tuple[int, int, int]] = set()

    for i, ev in enumerate(s.events):
        if isinstance(ev, TransmitEvent):
            if ev.time < 0:
                out.append(Violation("NegativeTick", (i, ev.time)))
            sender_ok = node_ok(ev.sender, i)
            if not ev.heads:
                out.append(Violation("EmptyHeads", (i,)))
            if sender_ok:
                sends[ev.sender].add(ev.time)
            recipients = [h.to for h in ev.heads]
            if len(set(recipients)) != len(recipients):
                out.append(Violation("DuplicateRecipient", (i,)))
            for h in ev.heads:
                if h.delay < 1:
                    out.append(Violation("NonPositiveDelay", (i, h.to, h.delay)))
                if h.to == ev.sender:
                    out.append(Violation("SenderIsRecipient", (i, h.to)))
                if node_ok(h.to, i):
                    receives[h.to].add(ev.time + h.delay)
        else:
            if not 0 <= ev.message < s.k:
                out.append(Violation("MessageOutOfRange", (i, ev.message)))
            else:
                generated.add(ev.message)
            if not ev.origins:
                out.append(Violation("EmptyOrigins", (i,)))
            for u, t in ev.origins:
                if t < 0:
                    out.append(Violation("NegativeTick", (i, t)))
                if node_ok(u, i):
                    receives[u].add(t)
                key = (ev.message, u, t)
                if key in seen_origins:
                    out.append(Violation("DuplicateGeneration", key))
                seen_origins.add(key)

    for m in range(max(s.k, 0)):
        if m not in generated:
            out.append(Violation("MessageNeverGenerated", (m,)))
    for u in sorted(sends):
        for t in sorted(sends[u] & receives.get(u, set())):
            out.append(Violation("SimultaneousSendReceive", (u, t)))
    return out


def check(s: Schedule) -> Schedule:
    problems = validate(s)
    if problems:
        raise InvalidSchedule(problems)
    return s


# hypergraph


@dataclass(frozen=True)
class Hyperedge:
    index: int
    tail: VertexCopy
    heads: tuple[VertexCopy, ...]  # sorted
    kind: str  # "message" | "transmit"
    ref: int  # message id or event index
    out_index: int  # position among the tail's outgoing hyperedges

    def __str__(self) -> str:
        return f"({self.tail}, {{{', '.join(map(str, self.heads))}}})"


@dataclass(frozen=True)
class Arrival:
    """One in-hyperedge landing at a vertex copy, with its ordering key."""

    edge: int
    order: tuple


@dataclass
class TimeExpandedHypergraph:
    schedule: Schedule
    copies: tuple[VertexCopy, ...]  # sorted by (time, node), supersource first
    hyperedges: tuple[Hyperedge, ...]
    supersource: VertexCopy = SUPERSOURCE

    def __post_init__(self):
        self._ticks: dict[int, list[int]] = defaultdict(list)
        for c in self.copies:
            if not c.is_source:
                self._ticks[c.node].append(c.time)
        self._arrivals: dict[VertexCopy, list[Arrival]] = defaultdict(list)
        self._out: dict[VertexCopy, list[int]] = defaultdict(list)
        for e in self.hyperedges:
            self._out[e.tail].append(e.index)
            for h in e.heads:
                self._arrivals[h].append(Arrival(e.index, arrival_order(e, h.time)))
        for lst in self._arrivals.values():
            lst.sort(key=lambda a: a.order)

    @property
    def k(self) -> int:
        return self.schedule.k

    @property
    def nodes(self) -> list[int]:
        return sorted(self._ticks)

    def ticks(self, node: int) -> list[int]:
        """Sorted ticks at which ``node`` has a vertex copy."""
        return self._ticks.get(node, [])

    def previous(self, v: VertexCopy) -> VertexCopy | None:
        ts = self._ticks[v.node]
        i = ts.index(v.time)
        return VertexCopy(v.node, ts[i - 1]) if i > 0 else None

    def next(self, v: VertexCopy) -> VertexCopy | None:
        ts = self._ticks[v.node]
        i = ts.index(v.time)
        return VertexCopy(v.node, ts[i + 1]) if i + 1 < len(ts) else None

    def arrivals(self, v: VertexCopy) -> list[Arrival]:
        """In-hyperedges of v in in-edge order."""
        return self._arrivals.get(v, [])

    def outgoing(self, v: VertexCopy) -> list[Hyperedge]:
        return [self.hyperedges[i] for i in self._out.get(v, [])]

    def is_receive_copy(self, v: VertexCopy) -> bool:
        return bool(self._arrivals.get(v))

    def final_copies(self) -> list[VertexCopy]:
        return [VertexCopy(u, ts[-1]) for u, ts in sorted(self._ticks.items())]


def arrival_order(e: Hyperedge, tick: int) -> tuple:
    # generations first (by message id), then receptions by (sender, event index)
    if e.kind == "message":
        return (tick, 0, e.ref, 0)
    return (tick, 1, e.tail.node, e.ref)


def build_hypergraph(s: Schedule) -> TimeExpandedHypergraph:
    check(s)
    copies: set[VertexCopy] = set()
    origins: dict[int, set[VertexCopy]] = defaultdict(set)
    for _, ev in s.generations():
        for u, t in ev.origins:
            origins[ev.message].add(VertexCopy(u, t))
            copies.add(VertexCopy(u, t))

    edges: list[Hyperedge] = []
    for msg in range(s.k):
        heads = tuple(sorted(origins[msg], key=lambda c: (c.time, c.node)))
        edges.append(Hyperedge(len(edges), SUPERSOURCE, heads, "message", msg, msg))

    out_count: dict[VertexCopy, int] = defaultdict(int)
    for i, ev in s.transmissions():
        tail = VertexCopy(ev.sender, ev.time)
        copies.add(tail)
        heads = tuple(
            sorted((VertexCopy(h.to, ev.time + h.delay) for h in ev.heads), key=lambda c: (c.time, c.node))
        )
        copies.update(heads)
        edges.append(Hyperedge(len(edges), tail, heads, "transmit", i, out_count[tail]))
        out_count[tail] += 1

    ordered = (SUPERSOURCE,) + tuple(sorted(copies, key=lambda c: (c.time, c.node)))
    return TimeExpandedHypergraph(s, ordered, tuple(edges))


def drop_uninformed_sends(s: Schedule) -> Schedule:
    """Remove transmissions by nodes that have not yet received or generated.

    Processed in tick order, so dropping one send can make later sends of
    its recipients uninformed as well.
    """
    informed_at: dict[int, int] = {}
    for _, ev in s.generations():
        for u, t in ev.origins:
            informed_at[u] = min(t, informed_at.get(u, t))
    keep: set[int] = set()
    for i, ev in sorted(s.transmissions(), key=lambda p: (p[1].time, p[1].sender, p[0])):
        if informed_at.get(ev.sender, ev.time) < ev.time:
            keep.add(i)
            for h in ev.heads:
                t = ev.time + h.delay
                informed_at[h.to] = min(t, informed_at.get(h.to, t))
    events = tuple(ev for i, ev in enumerate(s.events) if isinstance(ev, GenerateEvent) or i in keep)
    return Schedule(s.n, s.k, s.l, events, s.meta)


# generators


def gen_line(n: int, k: int, repetitions: int, l: int = 4) -> Schedule:
    """Chain 0 -> 1 -> ... -> n-1; each hop repeated, hops run back to back.

    All k messages start at node 0 at tick 0.
    """
    if n < 2 or k < 1 or repetitions < 1:
        raise ValueError("gen_line needs n >= 2, k >= 1, repetitions >= 1")
    events: list[Event] = [GenerateEvent(m, ((0, 0),)) for m in range(k)]
    start = 1
    for hop in range(n - 1):
        for r in range(repetitions):
            events.append(TransmitEvent(hop, start + r, (Head(hop + 1, 1),)))
        # next hop starts after this hop's last arrival
        start += repetitions + 1
    meta = {"generator": "line", "n": n, "k": k, "repetitions": repetitions, "l": l}
    return Schedule(n, k, l, tuple(events), meta)


def gen_gossip(n: int, k: int, rounds: int, fanout: int = 1, seed: int = 0, l: int = 4) -> Schedule:
    """Synchronous push gossip: in round r every node sends at tick 2r+1.

    Arrivals land on even ticks, so no node sends and receives at once.
    """
    if n < 2 or rounds < 1 or k < 1 or fanout < 1:
        raise ValueError("gen_gossip needs n >= 2, k >= 1, rounds >= 1, fanout >= 1")
    rng = random.Random(seed)
    fanout = min(fanout, n - 1)
    events: list[Event] = [GenerateEvent(m, ((rng.randrange(n), 0),)) for m in range(k)]
    for r in range(rounds):
        for u in range(n):
            peers = rng.sample([v for v in range(n) if v != u], fanout)
            events.append(TransmitEvent(u, 2 * r + 1, tuple(Head(v, 1) for v in peers)))
    meta = {"generator": "gossip", "n": n, "k": k, "rounds": rounds, "fanout": fanout, "seed": seed, "l": l}
    return Schedule(n, k, l, tuple(events), meta)


def gen_random_dynamic(
    n: int, k: int, events: int, max_delay: int = 3, seed: int = 0, l: int = 4, max_heads: int = 3
) -> Schedule:
    """An arbitrary valid event sequence fixed in advance (oblivious adversary).

    Messages get one or two origins; transmissions pick a random sender,
    tick, recipient set and per-recipient delays in [1, max_delay], and are
    resampled whenever they would clash with the send/receive rule.
    """
    if n < 2 or k < 1 or events < 1 or max_delay < 1:
        raise ValueError("gen_random_dynamic needs n >= 2, k >= 1, events >= 1, max_delay >= 1")
    rng = random.Random(seed)
    horizon = max(4, events)
    sends: dict[int, set[int]] = defaultdict(set)
    recvs: dict[int, set[int]] = defaultdict(set)
    evs: list[Event] = []
    for m in range(k):
        origins = []
        for _ in range(1 if rng.random() < 0.7 else 2):
            u, t = rng.randrange(n), rng.randrange(0, max(1, horizon // 4))
            if (u, t) not in origins:
                origins.append((u, t))
                recvs[u].add(t)
        evs.append(GenerateEvent(m, tuple(origins)))
    placed = 0
    attempts = 0
    while placed < events and attempts < 50 * events:
        attempts += 1
        u = rng.randrange(n)
        t = rng.randrange(0, horizon)
        if t in recvs[u]:
            continue
        b = rng.randint(1, min(max_heads, n - 1))
        peers = rng.sample([v for v in range(n) if v != u], b)
        heads = tuple(Head(v, rng.randint(1, max_delay)) for v in peers)
        if any(t + h.delay in sends[h.to] for h in heads):
            continue
        sends[u].add(t)
        for h in heads:
            recvs[h.to].add(t + h.delay)
        evs.append(TransmitEvent(u, t, heads))
        placed += 1
    meta = {"generator": "random", "n": n, "k": k, "events": events, "max_delay": max_delay, "seed": seed, "l": l}
    return Schedule(n, k, l, tuple(evs), meta)
