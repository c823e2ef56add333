from __future__ import annotations

import json

import pytest

from pnclab.circuits import CoefficientOracle, PerturbedOracle
from pnclab.protocols import Accumulator, Pnc, Recombinator, random_messages
from pnclab.schedule import VertexCopy, gen_gossip
from pnclab.verify import (
    CampaignConfig,
    InvariantViolation,
    campaign_schedule,
    check_mincut_equivalences,
    check_simulation_equivalence,
    derive_seed,
    field_for,
    optimality_campaign,
    run_trial,
    wilson_interval,
)

V = VertexCopy


@pytest.mark.parametrize("protocol", [Pnc(), Recombinator(1), Recombinator(2), Accumulator(1), Accumulator(2)], ids=str)
def test_example_a_simulation_matches_circuit(example_a, protocol):
    f = field_for(16)
    for seed in range(5):
        res = check_simulation_equivalence(example_a, random_messages(f, 2, 2, seed), seed, f, protocol)
        assert res.passed and res.packets_compared == 3


def test_perturbed_oracle_is_caught_at_the_right_packet(example_a):
    f = field_for(16)
    msgs = random_messages(f, 2, 2, 0)
    bad = PerturbedOracle(CoefficientOracle(f, 3), V(0, 2), ("tx", 0))
    res = check_simulation_equivalence(example_a, msgs, 3, f, Pnc(), circuit_oracle=bad)
    assert not res.passed
    assert res.first_divergence == "packet of event 3 sent by 0@2"


def test_gossip_schedules_simulate_exactly():
    f = field_for(8)
    for i in range(10):
        s = gen_gossip(6, 3, 4, fanout=1 + i % 2, seed=i)
        for protocol in (Pnc(), Recombinator(2), Accumulator(2)):
            assert check_simulation_equivalence(s, random_messages(f, 3, 4, i), i, f, protocol).passed


def test_example_cut_equalities(example_a, example_b):
    res = check_mincut_equivalences(example_a, None)
    assert res.passed
    for g in ("ginf", "gpnc"):
        assert [res.values[g][V(1, t)] for t in (2, 3, 4)] == [1, 2, 2]
    res = check_mincut_equivalences(example_b, 1)
    assert res.passed
    assert {res.values[g][V(1, 3)] for g in ("gmu", "grecomb", "gacc")} == {1}


def test_wilson_interval():
    lo, hi = wilson_interval(0, 0)
    assert (lo, hi) == (0.0, 1.0)
    lo, hi = wilson_interval(95, 100)
    assert lo < 0.95 < hi
    assert wilson_interval(100, 100)[1] == 1.0
    # reference value for 8/10 at 95%
    lo, hi = wilson_interval(8, 10)
    assert lo == pytest.approx(0.4902, abs=1e-4) and hi == pytest.approx(0.9433, abs=1e-4)


def test_seeds_are_derived_by_counter():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert len({derive_seed(1, i) for i in range(100)}) == 100


def test_campaign_report(tmp_path):
    cfg = CampaignConfig(protocol="acc", mu=2, field=16, trials=30, seed=3, n_max=6, max_events=30)
    rep = optimality_campaign(cfg)
    assert rep.trials == 30 and rep.violations == 0
    assert 0.0 <= rep.success_rate <= 1.0
    summary = json.loads(rep.to_json())
    assert {"config", "success_rate", "epsilon_hat", "violations", "ci95"} <= set(summary)
    assert summary["epsilon_target"] == 0.01
    text = rep.to_csv()
    assert text.startswith("# ") and json.loads(text.splitlines()[0][2:])["config"]["seed"] == 3
    assert len(text.splitlines()) == len(rep.records) + 2


def test_campaign_is_reproducible_and_worker_independent():
    cfg = CampaignConfig(protocol="recomb", mu="k", field=8, trials=12, seed=5, n_max=6, max_events=30)
    a = optimality_campaign(cfg)
    b = optimality_campaign(CampaignConfig(**{**cfg.__dict__, "workers": 2}))
    assert a.to_csv().splitlines()[1:] == b.to_csv().splitlines()[1:]
    assert a.to_csv() == optimality_campaign(cfg).to_csv()


def test_destinations_restrict_query_points():
    cfg = CampaignConfig(trials=5, seed=1, queries="all", destinations=[0], n_max=5, max_events=20)
    assert all(r.node == 0 for i in range(5) for r in run_trial(cfg, i))


def test_recombinator_with_mu_k_has_the_pnc_targets():
    for i in range(10):
        pnc = run_trial(CampaignConfig(protocol="pnc", seed=2, queries="all"), i)
        rec = run_trial(CampaignConfig(protocol="recomb", mu="k", seed=2, queries="all"), i)
        assert [(r.node, r.tick, r.min_cut) for r in pnc] == [(r.node, r.tick, r.min_cut) for r in rec]


def test_small_field_is_observational_only():
    cfg = CampaignConfig(field=4, trials=5)
    assert cfg.target() is None


def test_strict_mode_raises_on_bound_violation(monkeypatch):
    from pnclab import verify

    def fake(config, index):
        return [verify.TrialRecord(index, "pnc", None, 16, 0, 0, 0, 3, 2)]

    monkeypatch.setattr(verify, "run_trial", fake)
    cfg = CampaignConfig(trials=2)
    assert optimality_campaign(cfg).violations == 2
    with pytest.raises(InvariantViolation):
        optimality_campaign(cfg, strict=True)


def test_campaign_schedules_are_informed():
    cfg = CampaignConfig(seed=0)
    for i in range(20):
        s = campaign_schedule(cfg, derive_seed(0, i))
        assert 2 <= s.n <= 10 and 1 <= s.k <= 4
        assert len(list(s.transmissions())) <= 100
        informed: dict[int, int] = {}
        for _, ev in s.generations():
            for u, t in ev.origins:
                informed[u] = min(t, informed.get(u, t))
        for _, ev in sorted(s.transmissions(), key=lambda p: p[1].time):
            assert informed.get(ev.sender, ev.time) < ev.time
            for h in ev.heads:
                informed[h.to] = min(ev.time + h.delay, informed.get(h.to, ev.time + h.delay))
