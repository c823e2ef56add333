"""Discrete-event execution of PNC and its finite-buffer variants.

Nodes react to three things: a message being generated locally, a packet
arriving, and a request to transmit.  Events are processed per (tick, node)
batch; all arrivals at a node in one tick are handled together, and a node
never sends and receives in the same tick.

All coding coefficients come from a :class:`~pnclab.circuits.CoefficientOracle`
keyed exactly like the corresponding circuit transform, so a protocol run and
the evaluation of its circuit with the same seed produce identical packets.
"""

from __future__ import annotations

import csv
import heapq
import io
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .circuits import Aux, CoefficientOracle
from .gf import GF, EchelonBasis, NotDecodable, Packet, decode
from .schedule import GenerateEvent, Schedule, TransmitEvent, VertexCopy, check


@dataclass(frozen=True)
class Pnc:
    name = "pnc"

    @property
    def mu(self):
        return None


@dataclass(frozen=True)
class Recombinator:
    mu: int
    name = "recomb"


@dataclass(frozen=True)
class Accumulator:
    mu: int
    name = "acc"


Protocol = Union[Pnc, Recombinator, Accumulator]


def protocol_from_name(name: str, mu: int | None = None, k: int | None = None) -> Protocol:
    """Build a protocol from its CLI name; a missing mu means unbounded (k)."""
    if name == "pnc":
        return Pnc()
    if name not in ("recomb", "acc"):
        raise ValueError(f"unknown protocol {name!r}")
    width = mu if mu is not None else k
    if width is None or width < 1:
        raise ValueError("bounded protocols need mu >= 1")
    return Recombinator(width) if name == "recomb" else Accumulator(width)


@dataclass
class SimulatorTrace:
    schedule: Schedule
    protocol: Protocol
    field: GF
    messages: np.ndarray
    seed: int
    rank: dict[VertexCopy, int] = field(default_factory=dict)
    knowledge: dict[VertexCopy, np.ndarray] = field(default_factory=dict)
    emitted: dict[int, Packet] = field(default_factory=dict)  # event index -> packet

    @property
    def k(self) -> int:
        return self.schedule.k

    def _point(self, v: int, t: int) -> VertexCopy:
        q = VertexCopy(v, t)
        if q not in self.rank:
            raise KeyError(f"{q} is not a vertex copy")
        return q

    def packets_at(self, v: int, t: int) -> list[Packet]:
        rows = self.knowledge[self._point(v, t)]
        return [Packet(r, self.k) for r in rows]

    def final_points(self) -> list[VertexCopy]:
        last: dict[int, int] = {}
        for q in self.rank:
            last[q.node] = max(q.time, last.get(q.node, q.time))
        return [VertexCopy(u, t) for u, t in sorted(last.items())]

    def decodable(self) -> dict[int, bool]:
        return {q.node: self.rank[q] == self.k for q in self.final_points()}

    def ranks_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node", "tick", "rank", "decodable"])
        for q in sorted(self.rank, key=lambda c: (c.node, c.time)):
            w.writerow([q.node, q.time, self.rank[q], int(self.rank[q] == self.k)])
        return buf.getvalue()

    def emitted_csv(self) -> str:
        digits = (self.field.m + 3) // 4
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["event", "header"])
        for i in sorted(self.emitted):
            w.writerow([i, " ".join(f"{int(x):0{digits}x}" for x in self.emitted[i].header)])
        return buf.getvalue()


def rank_at(trace: SimulatorTrace, v: int, t: int) -> int:
    """Header rank of node v's knowledge after tick t."""
    return trace.rank[trace._point(v, t)]


def decode_at(trace: SimulatorTrace, v: int, t: int) -> np.ndarray:
    """The k x l message matrix recovered at (v, t); raises NotDecodable."""
    pkts = trace.packets_at(v, t)
    if not pkts:
        raise NotDecodable(0, trace.k)
    return decode(trace.field, pkts, trace.k)


# node state machines


class _PncNode:
    """Store every received packet verbatim; send random span elements."""

    def __init__(self, width: int, k: int, field: GF):
        self.store = np.zeros((8, width), dtype=np.int64)
        self.size = 0
        self.basis = EchelonBasis(field, k)
        self.generated: set[int] = set()

    def _append(self, row: np.ndarray) -> None:
        if self.size == len(self.store):
            self.store = np.vstack([self.store, np.zeros_like(self.store)])
        self.store[self.size] = row
        self.size += 1
        self.basis.add(row[: self.basis.width])

    def receive(self, batch, node, tick, oracle, field) -> None:
        for kind, ref, data in batch:
            if kind == "gen":
                # a node that already knows message ref learns nothing new
                if ref in self.generated:
                    continue
                self.generated.add(ref)
            self._append(data)

    def emit(self, node, tick, j, oracle, field) -> np.ndarray:
        coeffs = oracle.draw(VertexCopy(node, tick), ("tx", j), self.size)
        return field.combine(coeffs, self.store[: self.size])

    def snapshot(self):
        return self.store[: self.size].copy(), self.basis.rank


class _RecombinatorNode:
    """Re-draw all mu registers from registers plus arrivals at every event."""

    def __init__(self, mu: int, width: int, k: int):
        self.mu = mu
        self.k = k
        self.registers = np.zeros((mu, width), dtype=np.int64)
        self.started = False
        self._inputs = None

    def _inputs_with(self, rows) -> np.ndarray:
        parts = ([self.registers] if self.started else []) + [np.asarray(r)[None, :] for r in rows]
        if not parts:
            return np.zeros((0, self.registers.shape[1]), dtype=np.int64)
        return np.vstack(parts)

    def receive(self, batch, node, tick, oracle, field) -> None:
        self._inputs = self._inputs_with([data for _, _, data in batch])

    def emit(self, node, tick, j, oracle, field) -> np.ndarray:
        if self._inputs is None:
            self._inputs = self._inputs_with([])
        coeffs = oracle.draw(VertexCopy(node, tick), ("tx", j), len(self._inputs))
        return field.combine(coeffs, self._inputs)

    def finish_tick(self, node, tick, oracle, field) -> None:
        inputs = self._inputs if self._inputs is not None else self._inputs_with([])
        new = np.zeros_like(self.registers)
        for i in range(self.mu):
            coeffs = oracle.draw(VertexCopy(node, tick), ("reg", i), len(inputs))
            new[i] = field.combine(coeffs, inputs)
        self.registers = new
        self.started = True
        self._inputs = None

    def snapshot(self, field: GF):
        return self.registers.copy(), field.rank(self.registers[:, : self.k])


class _AccumulatorNode:
    """Add an independent random multiple of each arrival to every register."""

    def __init__(self, mu: int, width: int, k: int):
        self.mu = mu
        self.k = k
        self.registers = np.zeros((mu, width), dtype=np.int64)
        self.started = False

    def receive(self, batch, node, tick, oracle, field) -> None:
        for i in range(self.mu):
            coeffs = oracle.draw(Aux("R", node, tick, i), ("reg", 0), len(batch))
            for c, (_, _, data) in zip(coeffs.tolist(), batch):
                if c:
                    self.registers[i] ^= field.vmul(data, c)

    def emit(self, node, tick, j, oracle, field) -> np.ndarray:
        count = self.mu if self.started else 0
        coeffs = oracle.draw(Aux("X", node, tick, j), ("tx", 0), count)
        return field.combine(coeffs, self.registers[:count])

    def finish_tick(self, node, tick, oracle, field) -> None:
        self.started = True

    def snapshot(self, field: GF):
        return self.registers.copy(), field.rank(self.registers[:, : self.k])


def _new_node(protocol: Protocol, width: int, k: int, field: GF):
    if isinstance(protocol, Pnc):
        return _PncNode(width, k, field)
    if protocol.mu < 1:
        raise ValueError("mu must be >= 1")
    if isinstance(protocol, Recombinator):
        return _RecombinatorNode(protocol.mu, width, k)
    return _AccumulatorNode(protocol.mu, width, k)


_GEN, _RECV, _SEND = 0, 1, 2


def run(
    s: Schedule,
    protocol: Protocol,
    field: GF,
    messages,
    seed: int,
    oracle: CoefficientOracle | None = None,
) -> SimulatorTrace:
    """Execute ``protocol`` on schedule ``s`` and record per-copy knowledge."""
    check(s)
    messages = np.asarray(messages, dtype=np.int64)
    if messages.shape != (s.k, s.l):
        raise ValueError(f"messages must have shape ({s.k}, {s.l}), got {messages.shape}")
    oracle = oracle or CoefficientOracle(field, seed)
    width = s.k + s.l
    trace = SimulatorTrace(s, protocol, field, messages, seed)
    nodes = {}

    # heap entries: (tick, node, phase, order..., payload)
    heap: list[tuple] = []
    for i, ev in enumerate(s.events):
        if isinstance(ev, GenerateEvent):
            data = Packet.source(ev.message, messages[ev.message], s.k).data
            for u, t in ev.origins:
                heapq.heappush(heap, (t, u, _GEN, ev.message, 0, i, data))
        else:
            heapq.heappush(heap, (ev.time, ev.sender, _SEND, i, 0, i, None))
    out_index: dict[tuple[int, int], int] = {}

    while heap:
        tick, node = heap[0][0], heap[0][1]
        batch = []
        sends = []
        while heap and heap[0][0] == tick and heap[0][1] == node:
            entry = heapq.heappop(heap)
            if entry[2] == _SEND:
                sends.append(entry[5])
            else:
                batch.append(("gen" if entry[2] == _GEN else "recv", entry[3], entry[6]))
        if batch and sends:
            raise AssertionError(f"node {node} sends and receives at tick {tick}")
        state = nodes.get(node)
        if state is None:
            state = nodes[node] = _new_node(protocol, width, s.k, field)
        if batch:
            state.receive(batch, node, tick, oracle, field)
        for ev_index in sends:
            ev: TransmitEvent = s.events[ev_index]
            j = out_index.get((node, tick), 0)
            out_index[(node, tick)] = j + 1
            data = state.emit(node, tick, j, oracle, field)
            trace.emitted[ev_index] = Packet(data, s.k)
            for h in ev.heads:
                heapq.heappush(heap, (tick + h.delay, h.to, _RECV, node, ev_index, ev_index, data))
        if isinstance(protocol, Pnc):
            rows, rk = state.snapshot()
        else:
            state.finish_tick(node, tick, oracle, field)
            rows, rk = state.snapshot(field)
        q = VertexCopy(node, tick)
        trace.knowledge[q] = rows
        trace.rank[q] = rk
    return trace


def random_messages(field: GF, k: int, l: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x6D657373]))
    return field.random(rng, (k, l))
