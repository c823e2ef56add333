"""Max-flow / min-cut on lowered hypergraphs.

A hyperedge ``(tail, heads)`` of capacity c is lowered to a gadget vertex w
with arcs ``tail -> w`` and ``w -> h`` (all capacity c), so a single-sink cut
pays for the hyperedge at most once.  Single-head hyperedges become plain arcs.
"""

from __future__ import annotations

import bisect
import csv
import io
import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable

from .schedule import VertexCopy


class UnknownVertex(KeyError):
    pass


class TooLarge(ValueError):
    pass


class FlowNetwork:
    """Directed graph with integer capacities in residual (paired-arc) form.

    Arc ``a`` and its reverse ``a ^ 1`` are stored next to each other.
    """

    def __init__(self):
        self.names: list[Hashable] = []
        self.index: dict[Hashable, int] = {}
        self.adj: list[list[int]] = []
        self.to: list[int] = []
        self.cap: list[int] = []
        self.times: list[int] = []

    def add_vertex(self, name: Hashable, time: int = 0) -> int:
        if name in self.index:
            return self.index[name]
        self.index[name] = len(self.names)
        self.names.append(name)
        self.adj.append([])
        self.times.append(time)
        return self.index[name]

    def add_arc(self, u: Hashable, v: Hashable, capacity: int) -> None:
        if capacity < 0:
            raise ValueError("negative capacity")
        a, b = self.add_vertex(u), self.add_vertex(v)
        if a == b:
            raise ValueError(f"self-loop at {u}")
        self.adj[a].append(len(self.to))
        self.to.append(b)
        self.cap.append(capacity)
        self.adj[b].append(len(self.to))
        self.to.append(a)
        self.cap.append(0)

    def arcs(self) -> list[tuple[Hashable, Hashable, int]]:
        out = []
        for u, lst in enumerate(self.adj):
            for a in lst:
                if a % 2 == 0:
                    out.append((self.names[u], self.names[self.to[a]], self.cap[a]))
        return out

    def __len__(self) -> int:
        return len(self.names)

    def _vid(self, name) -> int:
        try:
            return self.index[name]
        except KeyError:
            raise UnknownVertex(name) from None


def _dinic(adj, to, cap, s: int, t: int, limit: int | None = None) -> int:
    """Blocking-flow max-flow; mutates ``cap`` into the residual capacities.

    Vertices with id >= limit (other than t) are ignored.
    """
    n = len(adj)
    if limit is None:
        limit = n
    flow = 0
    while True:
        level = [-1] * n
        level[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            if level[t] >= 0 and level[u] >= level[t]:
                break
            nl = level[u] + 1
            for a in adj[u]:
                if cap[a] > 0:
                    w = to[a]
                    if level[w] < 0 and (w < limit or w == t):
                        level[w] = nl
                        queue.append(w)
        if level[t] < 0:
            return flow
        it = [0] * n
        while True:
            # iterative DFS along the level graph
            stack = [s]
            path: list[int] = []
            pushed = 0
            while stack:
                u = stack[-1]
                if u == t:
                    pushed = min(cap[a] for a in path)
                    for a in path:
                        cap[a] -= pushed
                        cap[a ^ 1] += pushed
                    break
                lst = adj[u]
                i = it[u]
                nxt = level[u] + 1
                while i < len(lst):
                    a = lst[i]
                    if cap[a] > 0 and level[to[a]] == nxt:
                        break
                    i += 1
                it[u] = i
                if i < len(lst):
                    a = lst[i]
                    stack.append(to[a])
                    path.append(a)
                else:
                    level[u] = -1
                    stack.pop()
                    if path:
                        path.pop()
                        it[stack[-1]] += 1
            if not pushed:
                break
            flow += pushed


def max_flow(net: FlowNetwork, source: Hashable, sink: Hashable) -> int:
    """Exact integer max-flow (= min-cut) from source to sink."""
    s, t = net._vid(source), net._vid(sink)
    if s == t:
        raise ValueError("source and sink coincide")
    return _dinic(net.adj, net.to, list(net.cap), s, t)


def brute_force_max_flow(net: FlowNetwork, source: Hashable, sink: Hashable, max_arcs: int = 20) -> int:
    """Minimum over all source/sink bipartitions of the crossing capacity."""
    s, t = net._vid(source), net._vid(sink)
    arcs = [(u, net.to[a], net.cap[a]) for u, lst in enumerate(net.adj) for a in lst if a % 2 == 0]
    if len(arcs) > max_arcs:
        raise TooLarge(f"{len(arcs)} arcs > {max_arcs}")
    others = sorted({x for u, v, _ in arcs for x in (u, v)} - {s, t})
    if len(others) > 20:
        raise TooLarge(f"{len(others)} free vertices")
    best = None
    for bits in itertools.product((False, True), repeat=len(others)):
        side = {s}
        side.update(v for v, b in zip(others, bits) if b)
        cut = sum(c for u, v, c in arcs if u in side and v not in side)
        if best is None or cut < best:
            best = cut
    return best if best is not None else 0


# hypergraph lowering


@dataclass
class Lowered:
    """A lowered hypergraph plus the bookkeeping needed for fast queries."""

    net: FlowNetwork
    source: Hashable
    ports: dict[int, Hashable] = field(default_factory=dict)  # edge index -> gadget vertex

    def limit(self, time: int) -> int:
        """Number of leading vertices whose time is <= ``time``."""
        return bisect.bisect_right(self.net.times, time)


def _time(v) -> int:
    return getattr(v, "time", 0)


def lower(h, tap_edges: Iterable[int] = ()) -> Lowered:
    """Lower a capacitated hypergraph (or circuit) to a flow network.

    Edges listed in ``tap_edges`` always get a gadget vertex, so a sink can
    be attached to them.  Vertices are numbered in time order.
    """
    tap_edges = set(tap_edges)
    order = list(h.vertices)
    gadget = {}
    for e in h.edges:
        if len(e.heads) > 1 or e.index in tap_edges:
            gadget[e.index] = ("w", e.index)
    timed = [(_time(v), 0, i, v) for i, v in enumerate(order)]
    timed += [(_time(h.edges[i].tail), 1, i, w) for i, w in gadget.items()]
    timed.sort(key=lambda x: x[:3])
    net = FlowNetwork()
    for t, _, _, v in timed:
        net.add_vertex(v, t)
    for e in h.edges:
        if e.index in gadget:
            w = gadget[e.index]
            net.add_arc(e.tail, w, e.capacity)
            for x in e.heads:
                net.add_arc(w, x, e.capacity)
        elif e.heads:
            net.add_arc(e.tail, e.heads[0], e.capacity)
    return Lowered(net, h.source, gadget)


def _cached(h) -> Lowered:
    lo = getattr(h, "_flow", None)
    if lo is None:
        lo = lower(h)
        h._flow = lo
    return lo


def _tapped_flow(lo: Lowered, taps: list[tuple[Hashable, int]], time: int | None) -> int:
    net = lo.net
    s = net._vid(lo.source)
    sink = len(net.names)
    adj = list(net.adj)
    adj.append([])
    to = list(net.to)
    cap = list(net.cap)
    for v, c in taps:
        u = net._vid(v)
        adj[u] = adj[u] + [len(to)]
        to.append(sink)
        cap.append(c)
        adj[sink].append(len(to))
        to.append(u)
        cap.append(0)
    limit = None if time is None else lo.limit(time)
    return _dinic(adj, to, cap, s, sink, limit)


def min_cut(h, query: VertexCopy) -> int:
    """Min-cut between the supersource and query point (v, t) of graph h."""
    if query not in h.teg.copies or query.is_source:
        raise UnknownVertex(query)
    return _tapped_flow(_cached(h), h.taps(query), query.time)


def min_cuts(h, queries: Iterable[VertexCopy] | None = None) -> dict[VertexCopy, int]:
    if queries is None:
        queries = h.query_points()
    return {q: min_cut(h, q) for q in queries}


def min_cut_edges(h, edges: Iterable[int]) -> int:
    """Min-cut between the supersource and a set of hyperedges."""
    edges = list(edges)
    if not edges:
        return 0
    lo = lower(h, tap_edges=edges)
    return _tapped_flow(lo, [(lo.ports[i], h.edges[i].capacity) for i in edges], None)


# edge-list interchange


@dataclass
class _ListEdge:
    index: int
    tail: str
    heads: tuple[str, ...]
    capacity: int


@dataclass
class EdgeListHypergraph:
    """A hypergraph read back from the plain-text edge-list format."""

    edges: list[_ListEdge]
    source: str = "s"

    @property
    def vertices(self) -> list[str]:
        seen = dict.fromkeys([self.source])
        for e in self.edges:
            seen.setdefault(e.tail)
            for x in e.heads:
                seen.setdefault(x)
        return list(seen)


def parse_edge_list(text: str) -> EdgeListHypergraph:
    edges = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise ValueError(f"malformed edge line: {line!r}")
        edges.append(_ListEdge(len(edges), parts[0], tuple(parts[2:]), int(parts[1])))
    return EdgeListHypergraph(edges)


def edge_list_min_cut(h: EdgeListHypergraph, sink: str) -> int:
    lo = lower(h)
    return max_flow(lo.net, h.source, sink)


def cuts_csv(rows: Iterable[tuple[VertexCopy, int]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["node", "tick", "value"])
    for q, value in rows:
        w.writerow([q.node, q.time, value])
    return buf.getvalue()
