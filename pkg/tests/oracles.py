"""Slow reference implementations used only by the tests."""

from __future__ import annotations

import itertools

import numpy as np

from pnclab.flow import FlowNetwork


def hypergraph_cut(h, query) -> int:
    """Min-cut by enumerating every source-side vertex set of the hypergraph.

    A hyperedge is cut (once, at its capacity) when its tail is on the
    source side and some head is not; a tap (vertex, capacity) is cut when
    the vertex is on the source side.
    """
    taps = h.taps(query)
    free = [v for v in h.vertices if v != h.source]
    if len(free) > 18:
        raise ValueError("too many vertices for enumeration")
    best = None
    for bits in itertools.product((False, True), repeat=len(free)):
        side = {h.source, *(v for v, b in zip(free, bits) if b)}
        cost = sum(e.capacity for e in h.edges if e.tail in side and any(x not in side for x in e.heads))
        cost += sum(c for v, c in taps if v in side)
        if best is None or cost < best:
            best = cost
    return best


def random_network(rng: np.random.Generator, max_arcs: int = 20) -> tuple[FlowNetwork, int, int]:
    n = int(rng.integers(2, 9))
    net = FlowNetwork()
    for v in range(n):
        net.add_vertex(v)
    for _ in range(int(rng.integers(0, max_arcs + 1))):
        u, v = rng.choice(n, size=2, replace=False).tolist()
        net.add_arc(u, v, int(rng.integers(0, 6)))
    return net, 0, n - 1
