"""Information flow graphs, protocol transforms and circuit evaluation.

Every graph here is a :class:`CapacitatedHypergraph`: vertices (vertex
copies plus auxiliary template vertices), hyperedges with integer
capacities, and a rule (:meth:`~CapacitatedHypergraph.taps`) for how a query
point ``(v, t)`` attaches to a sink when measuring min-cuts.

The three protocol transforms additionally are :class:`Circuit` objects: each
vertex has an ordered in-edge list and each out-edge a coding vector drawn from
a :class:`CoefficientOracle`, so the circuit can be evaluated on messages.
"""

from __future__ import annotations

import graphlib
from collections import defaultdict
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .gf import GF, DimensionMismatch, Packet
from .schedule import SUPERSOURCE, Hyperedge, TimeExpandedHypergraph, VertexCopy, arrival_order

UNBOUNDED = None


class CyclicCircuit(ValueError):
    pass


class Aux(NamedTuple):
    """A template vertex: register ``R`` or transmission reader ``X``."""

    kind: str
    node: int
    time: int
    index: int

    def __str__(self) -> str:
        return f"{self.kind}{self.index}[{self.node}@{self.time}]"


Vertex = Union[VertexCopy, Aux]

_VERTEX_KIND = {"R": 1, "X": 2}
_ROLE = {"tx": 0, "reg": 1}


def vertex_key(v: Vertex) -> tuple:
    """Sort key that is also a topological order for every graph we build."""
    if isinstance(v, Aux):
        return (v.time, _VERTEX_KIND[v.kind], v.node, v.index)
    return (v.time, 0, v.node, 0)


@dataclass(frozen=True)
class Edge:
    index: int
    tail: Vertex
    heads: tuple[Vertex, ...]
    capacity: int
    kind: str  # message | transmit | memory | register
    ref: int | None = None  # message id, event index, or register slot
    out: tuple[str, int] | None = None  # oracle output index at the tail

    def __str__(self) -> str:
        return f"{self.tail} {self.capacity} " + " ".join(map(str, self.heads))


class CoefficientOracle:
    """Deterministic coefficient streams keyed by (seed, tail, output index).

    The j-th coefficient of a stream is the coefficient for the tail's j-th
    free in-edge (in-edges with a fixed coefficient do not consume the
    stream).  Protocol runs and circuit evaluations that share a seed draw
    identical coefficients.
    """

    def __init__(self, field: GF, seed: int):
        self.field = field
        self.seed = int(seed)

    def entropy(self, tail: Vertex, out: tuple[str, int]) -> list[int]:
        if isinstance(tail, Aux):
            v = (_VERTEX_KIND[tail.kind], tail.node, tail.time, tail.index)
        else:
            v = (0, tail.node, tail.time, 0)
        return [self.seed, *v, _ROLE[out[0]], out[1]]

    def draw(self, tail: Vertex, out: tuple[str, int], count: int) -> np.ndarray:
        if count == 0:
            return np.zeros(0, dtype=np.int64)
        rng = np.random.default_rng(np.random.SeedSequence(self.entropy(tail, out)))
        return rng.integers(0, self.field.q, size=count, dtype=np.int64)


class PerturbedOracle(CoefficientOracle):
    """Same streams, except the first coefficient of one key is changed."""

    def __init__(self, base: CoefficientOracle, tail: Vertex, out: tuple[str, int]):
        super().__init__(base.field, base.seed)
        self.target = (tail, out)

    def draw(self, tail, out, count):
        c = super().draw(tail, out, count)
        if (tail, out) == self.target and count:
            c = c.copy()
            c[0] ^= 1
        return c


class CapacitatedHypergraph:
    """Hyperedges with integer capacities over vertex copies and template vertices."""

    name = "capacitated"

    def __init__(self, teg: TimeExpandedHypergraph, edges: list[Edge], mu: int | None):
        self.teg = teg
        self.edges = edges
        self.mu = mu
        self.k = teg.k
        self.source: Vertex = SUPERSOURCE
        verts = {SUPERSOURCE}
        for e in edges:
            verts.add(e.tail)
            verts.update(e.heads)
        verts.update(self._extra_vertices())
        self.vertices: list[Vertex] = sorted(verts, key=vertex_key)
        self._flow = None

    def _extra_vertices(self):
        return self.teg.copies

    @property
    def memory(self) -> int:
        """Capacity of one node's memory; the sentinel k when unbounded."""
        return self.k if self.mu is None else self.mu

    def taps(self, v: VertexCopy) -> list[tuple[Vertex, int]]:
        """Arcs (vertex, capacity) joining the query sink for point v.

        The query measures what node v holds after processing tick t: the
        vertex copy, throttled to the node's memory.
        """
        return [(v, self.memory)]

    def query_points(self) -> list[VertexCopy]:
        return [c for c in self.teg.copies if not c.is_source]

    def edge_list(self) -> str:
        """One line per hyperedge: ``tail capacity head...``."""
        lines = [f"# {self.name} k={self.k} mu={'inf' if self.mu is None else self.mu}"]
        lines.extend(str(e) for e in self.edges)
        return "\n".join(lines) + "\n"

    def hyperedge_count(self, kind: str | None = None) -> int:
        return sum(1 for e in self.edges if kind is None or e.kind == kind)


class Circuit(CapacitatedHypergraph):
    """A memoryless coding circuit with fixed in-edge order at every vertex."""

    name = "circuit"

    def __init__(self, teg, edges, mu, in_order: dict[Vertex, list[tuple[tuple, int]]]):
        super().__init__(teg, edges, mu)
        self.in_edges: dict[Vertex, list[int]] = {
            v: [i for _, i in sorted(lst)] for v, lst in in_order.items()
        }
        self.out_edges: dict[Vertex, list[int]] = defaultdict(list)
        for e in edges:
            self.out_edges[e.tail].append(e.index)
        # vertex -> {in-edge position: coefficient} shared by all its out-edges
        self.fixed: dict[Vertex, dict[int, int]] = {}

    def state_edges(self, v: VertexCopy) -> list[int]:
        """Edges whose values make up node v's knowledge after tick t."""
        raise NotImplementedError

    def transmission_edge(self, event_index: int) -> Edge:
        for e in self.edges:
            if e.kind == "transmit" and e.ref == event_index:
                return e
        raise KeyError(event_index)

    def only_source_has_no_inputs(self) -> bool:
        tails = {e.tail for e in self.edges}
        return all(v == self.source or self.in_edges.get(v) for v in tails)


# G_mu / G_inf


def info_flow_graph(teg: TimeExpandedHypergraph, mu: int | None = UNBOUNDED) -> CapacitatedHypergraph:
    """The time-expanded hypergraph plus memory edges between consecutive copies."""
    if mu is not None and mu < 1:
        raise ValueError("mu must be >= 1")
    cap = teg.k if mu is None else mu
    edges = [Edge(i, e.tail, e.heads, 1, e.kind, e.ref) for i, e in enumerate(teg.hyperedges)]
    for node in teg.nodes:
        ts = teg.ticks(node)
        for a, b in zip(ts, ts[1:]):
            edges.append(Edge(len(edges), VertexCopy(node, a), (VertexCopy(node, b),), cap, "memory"))
    g = CapacitatedHypergraph(teg, edges, mu)
    g.name = "ginf" if mu is None else "gmu"
    return g


# PNC


class PncCircuit(Circuit):
    name = "gpnc"

    def taps(self, v):
        return [(v, self.k)]

    def state_edges(self, v):
        return self.in_edges.get(v, [])


def _closure(teg: TimeExpandedHypergraph, e: Hyperedge) -> dict[VertexCopy, tuple]:
    """Memory closure of e: every copy of a recipient at or after its arrival."""
    first: dict[int, int] = {}
    for h in e.heads:
        first[h.node] = min(h.time, first.get(h.node, h.time))
    out = {}
    for node, t0 in first.items():
        for t in teg.ticks(node):
            if t >= t0:
                out[VertexCopy(node, t)] = arrival_order(e, t0)
    return out


def pnc_transform(teg: TimeExpandedHypergraph) -> PncCircuit:
    edges: list[Edge] = []
    in_order: dict[Vertex, list] = defaultdict(list)
    for e in teg.hyperedges:
        closed = _closure(teg, e)
        heads = tuple(sorted(closed, key=vertex_key))
        out = None if e.kind == "message" else ("tx", e.out_index)
        edges.append(Edge(e.index, e.tail, heads, 1, e.kind, e.ref, out))
        for h, order in closed.items():
            in_order[h].append((order, e.index))
    return PncCircuit(teg, edges, None, in_order)


# mu-recombinator


class RecombinatorCircuit(Circuit):
    name = "grecomb"

    def state_edges(self, v):
        return [i for i in self.out_edges.get(v, []) if self.edges[i].kind == "memory"]


def recombinator_transform(teg: TimeExpandedHypergraph, mu: int | None) -> RecombinatorCircuit:
    """mu unit memory edges from every copy to the node's next copy.

    Each memory edge is a separate circuit output (one stored packet).  The
    last copy of a node keeps its mu memory edges with no heads so that its
    final registers are still visible to evaluation.
    """
    width = teg.k if mu is None else mu
    if width < 1:
        raise ValueError("mu must be >= 1")
    edges: list[Edge] = []
    in_order: dict[Vertex, list] = defaultdict(list)
    for e in teg.hyperedges:
        out = None if e.kind == "message" else ("tx", e.out_index)
        edges.append(Edge(e.index, e.tail, e.heads, 1, e.kind, e.ref, out))
        for h in e.heads:
            in_order[h].append((arrival_order(e, h.time), e.index))
    for node in teg.nodes:
        ts = teg.ticks(node)
        for a, b in zip(ts, ts[1:] + [None]):
            tail = VertexCopy(node, a)
            heads = () if b is None else (VertexCopy(node, b),)
            for i in range(width):
                idx = len(edges)
                edges.append(Edge(idx, tail, heads, 1, "memory", i, ("reg", i)))
                if heads:
                    in_order[heads[0]].append(((-1, 0, i, 0), idx))
    return RecombinatorCircuit(teg, edges, mu, in_order)


# mu-accumulator


class AccumulatorCircuit(Circuit):
    name = "gacc"

    def _extra_vertices(self):
        return ()

    def taps(self, v):
        return [(Aux("R", v.node, v.time, i), 1) for i in range(self.memory)]

    def state_edges(self, v):
        out = []
        for i in range(self.memory):
            out.extend(self.out_edges.get(Aux("R", v.node, v.time, i), []))
        return out

    def query_points(self):
        return [c for c in self.teg.copies if not c.is_source]


def accumulator_transform(
    teg: TimeExpandedHypergraph, mu: int | None, closure: bool = True
) -> AccumulatorCircuit:
    """Replace each vertex copy of G_PNC by mu registers plus transmission readers.

    Register R_i(v, t) holds slot i after tick t.  It chains from R_i(v, t-)
    with coefficient fixed to 1, and every in-hyperedge landing at v_t fans
    into all mu registers.  A transmission at v_t reads the mu registers of the
    previous copy through its own vertex X_j(v, t), whose out-hyperedge reaches
    all registers of every recipient.

    With ``closure`` (the default) hyperedges are first extended to all later
    copies of their recipients.  The extended heads are part of the graph,
    but their coefficient is fixed to 0: the protocol folds a packet into the
    registers only at the tick it arrives.
    """
    width = teg.k if mu is None else mu
    if width < 1:
        raise ValueError("mu must be >= 1")
    edges: list[Edge] = []
    in_order: dict[Vertex, list] = defaultdict(list)
    extended: set[tuple[Vertex, int]] = set()  # (register, edge index)

    def regs(c: VertexCopy):
        return [Aux("R", c.node, c.time, i) for i in range(width)]

    for e in teg.hyperedges:
        landing = {h: arrival_order(e, h.time) for h in e.heads}
        if closure:
            for h, order in _closure(teg, e).items():
                landing.setdefault(h, order)
        heads = tuple(r for h in sorted(landing, key=vertex_key) for r in regs(h))
        if e.kind == "message":
            tail, out = SUPERSOURCE, None
        else:
            tail, out = Aux("X", e.tail.node, e.tail.time, e.out_index), ("tx", 0)
        idx = len(edges)
        edges.append(Edge(idx, tail, heads, 1, e.kind, e.ref, out))
        for h, order in landing.items():
            for r in regs(h):
                in_order[r].append((order, idx))
                if h not in e.heads:
                    extended.add((r, idx))

    for node in teg.nodes:
        ts = teg.ticks(node)
        for t, nxt in zip(ts, ts[1:] + [None]):
            readers = []
            if nxt is not None:
                readers = [
                    Aux("X", node, nxt, h.out_index) for h in teg.outgoing(VertexCopy(node, nxt))
                ]
            for i in range(width):
                tail = Aux("R", node, t, i)
                heads = ((Aux("R", node, nxt, i),) if nxt is not None else ()) + tuple(readers)
                idx = len(edges)
                edges.append(Edge(idx, tail, heads, 1, "register", i, ("reg", 0)))
                for h in heads:
                    key = (-1, 0, i, 0) if h.kind == "R" else (i,)
                    in_order[h].append((key, idx))

    c = AccumulatorCircuit(teg, edges, mu, in_order)
    for v, ins in c.in_edges.items():
        if v.kind != "R":
            continue
        fixed = {}
        for pos, i in enumerate(ins):
            if edges[i].kind == "register":
                fixed[pos] = 1
            elif (v, i) in extended:
                fixed[pos] = 0
        if fixed:
            c.fixed[v] = fixed
    return c


def build(teg: TimeExpandedHypergraph, graph: str, mu: int | None = UNBOUNDED) -> CapacitatedHypergraph:
    """Build a graph by name: ginf, gmu, gpnc, grecomb or gacc."""
    if graph == "ginf":
        return info_flow_graph(teg, UNBOUNDED)
    if graph == "gmu":
        return info_flow_graph(teg, mu)
    if graph == "gpnc":
        return pnc_transform(teg)
    if graph == "grecomb":
        return recombinator_transform(teg, mu)
    if graph == "gacc":
        return accumulator_transform(teg, mu)
    raise ValueError(f"unknown graph {graph!r}")


GRAPHS = ("ginf", "gmu", "gpnc", "grecomb", "gacc")


# evaluation


def _topological(c: Circuit) -> list[Vertex]:
    deps: dict[Vertex, set] = {v: set() for v in c.vertices}
    for e in c.edges:
        for h in e.heads:
            deps[h].add(e.tail)
    try:
        return list(graphlib.TopologicalSorter(deps).static_order())
    except graphlib.CycleError as exc:
        raise CyclicCircuit(str(exc)) from None


def evaluate(c: Circuit, messages, oracle: CoefficientOracle) -> np.ndarray:
    """Value of every hyperedge, as a (num_edges, k + l) array.

    The supersource edge of message i carries (e_i | messages[i]); every
    other edge carries its coding vector applied to the tail's in-edge values.
    """
    messages = np.asarray(messages, dtype=np.int64)
    k = c.k
    if messages.ndim != 2 or messages.shape[0] != k:
        raise DimensionMismatch(f"expected {k} message rows, got shape {messages.shape}")
    width = k + messages.shape[1]
    field = oracle.field
    values = np.zeros((len(c.edges), width), dtype=np.int64)
    for v in _topological(c):
        outs = c.out_edges.get(v, ())
        if not outs:
            continue
        if v == c.source:
            for i in outs:
                e = c.edges[i]
                values[i] = Packet.source(e.ref, messages[e.ref], k).data
            continue
        ins = c.in_edges.get(v, [])
        inputs = values[ins]
        fixed = c.fixed.get(v, {})
        free = [p for p in range(len(ins)) if p not in fixed]
        for i in outs:
            e = c.edges[i]
            coeffs = np.zeros(len(ins), dtype=np.int64)
            coeffs[free] = oracle.draw(e.tail, e.out, len(free))
            for p, val in fixed.items():
                coeffs[p] = val
            values[i] = field.combine(coeffs, inputs)
    return values


def transfer_matrix(c: Circuit, oracle: CoefficientOracle, edge_subset) -> np.ndarray:
    """k x |E'| matrix mapping source messages to the values on E'."""
    values = evaluate(c, np.zeros((c.k, 0), dtype=np.int64), oracle)
    return values[list(edge_subset)].T.copy()
