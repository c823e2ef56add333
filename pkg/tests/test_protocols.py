from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pnclab import circuits
from pnclab.flow import min_cut
from pnclab.gf import EchelonBasis, NotDecodable, is_consistent
from pnclab.protocols import Accumulator, Pnc, Recombinator, decode_at, protocol_from_name, random_messages, rank_at, run
from pnclab.schedule import (
    GenerateEvent,
    Head,
    InvalidSchedule,
    Schedule,
    TransmitEvent,
    VertexCopy,
    build_hypergraph,
    drop_uninformed_sends,
    gen_random_dynamic,
)
from pnclab.verify import field_for

V = VertexCopy
PROTOCOLS = [Pnc(), Recombinator(1), Recombinator(2), Accumulator(1), Accumulator(2)]


def messages_for(s, field, seed=0):
    return random_messages(field, s.k, s.l, seed)


def test_example_a_pnc_ranks(example_a, gf65536):
    msgs = messages_for(example_a, gf65536)
    full = 0
    for seed in range(1000):
        tr = run(example_a, Pnc(), gf65536, msgs, seed)
        assert rank_at(tr, 1, 2) == 1
        full += rank_at(tr, 1, 4) == 2
    assert full >= 990


def test_example_b_accumulator(example_b, gf65536):
    msgs = messages_for(example_b, gf65536)
    cut = min_cut(circuits.info_flow_graph(build_hypergraph(example_b), 1), V(1, 3))
    hits = sum(rank_at(run(example_b, Accumulator(1), gf65536, msgs, seed), 1, 3) == cut for seed in range(200))
    assert cut == 1 and hits >= 198


def test_generating_node_knows_everything(example_a, gf256):
    msgs = messages_for(example_a, gf256)
    tr = run(example_a, Pnc(), gf256, msgs, 1)
    assert rank_at(tr, 0, 0) == 2
    assert np.array_equal(decode_at(tr, 0, 0), msgs)


def test_decode_at_full_and_partial_rank(example_a, gf65536):
    msgs = messages_for(example_a, gf65536, 4)
    tr = run(example_a, Pnc(), gf65536, msgs, 2)
    with pytest.raises(NotDecodable):
        decode_at(tr, 1, 2)
    assert np.array_equal(decode_at(tr, 1, 4), msgs)


def test_unknown_point(example_a, gf16):
    tr = run(example_a, Pnc(), gf16, messages_for(example_a, gf16), 0)
    with pytest.raises(KeyError):
        rank_at(tr, 1, 1)


def test_invalid_schedule_rejected(gf16):
    s = Schedule(2, 1, 1, ())
    with pytest.raises(InvalidSchedule):
        run(s, Pnc(), gf16, np.zeros((1, 1), dtype=np.int64), 0)


def test_protocol_names():
    assert protocol_from_name("pnc") == Pnc()
    assert protocol_from_name("recomb", 2) == Recombinator(2)
    assert protocol_from_name("acc", None, 3) == Accumulator(3)
    with pytest.raises(ValueError):
        protocol_from_name("flood", 1)


@pytest.mark.parametrize("protocol", PROTOCOLS, ids=str)
def test_runs_are_deterministic(protocol, gf256):
    s = drop_uninformed_sends(gen_random_dynamic(6, 3, 40, seed=9))
    msgs = messages_for(s, gf256)
    a, b = run(s, protocol, gf256, msgs, 17), run(s, protocol, gf256, msgs, 17)
    assert a.ranks_csv() == b.ranks_csv()
    assert a.emitted_csv() == b.emitted_csv()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(PROTOCOLS))
def test_rank_bounded_by_cut_and_packets_consistent(seed, protocol):
    f = field_for(4)  # small field: rank deficits are common, bound must still hold
    s = drop_uninformed_sends(gen_random_dynamic(6, 3, 40, seed=seed))
    msgs = messages_for(s, f, seed)
    tr = run(s, protocol, f, msgs, seed)
    g = circuits.info_flow_graph(build_hypergraph(s), protocol.mu)
    for q, r in tr.rank.items():
        assert r <= min_cut(g, q)
        if protocol.mu is not None:
            assert r <= protocol.mu
        assert all(is_consistent(f, p, msgs) for p in tr.packets_at(q.node, q.time))
    for pkt in tr.emitted.values():
        assert is_consistent(f, pkt, msgs)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_pnc_rank_grows_and_emissions_lie_in_span(seed):
    f = field_for(8)
    s = drop_uninformed_sends(gen_random_dynamic(6, 3, 40, seed=seed))
    tr = run(s, Pnc(), f, messages_for(s, f), seed)
    by_node: dict[int, list[int]] = {}
    for q in sorted(tr.rank, key=lambda c: c.time):
        by_node.setdefault(q.node, []).append(tr.rank[q])
    assert all(r == sorted(r) for r in by_node.values())
    for i, ev in s.transmissions():
        prev = max((q for q in tr.knowledge if q.node == ev.sender and q.time <= ev.time), key=lambda q: q.time)
        basis = EchelonBasis(f, s.k)
        for row in tr.knowledge[prev]:
            basis.add(row[: s.k])
        assert basis.contains(tr.emitted[i].header)


def test_accumulator_keeps_mu_registers(gf256):
    s = drop_uninformed_sends(gen_random_dynamic(5, 3, 30, seed=2))
    tr = run(s, Accumulator(2), gf256, messages_for(s, gf256), 0)
    assert all(rows.shape[0] == 2 for rows in tr.knowledge.values())


def test_repeated_generation_adds_nothing_for_pnc(gf256):
    s = Schedule(2, 1, 1, (GenerateEvent(0, ((0, 0), (0, 2))), TransmitEvent(0, 1, (Head(1, 1),))))
    tr = run(s, Pnc(), gf256, [[3]], 0)
    assert tr.knowledge[V(0, 2)].shape[0] == 1


def test_csv_outputs(example_a, gf16):
    tr = run(example_a, Pnc(), gf16, messages_for(example_a, gf16), 0)
    lines = tr.ranks_csv().splitlines()
    assert lines[0] == "node,tick,rank,decodable"
    assert "1,2,1,0" in lines
    assert tr.emitted_csv().splitlines()[0] == "event,header"
    assert tr.decodable() == {0: True, 1: tr.rank[V(1, 4)] == 2}
