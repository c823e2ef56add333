"""Checks that tie protocol runs, circuit transforms and min-cuts together.

* :func:`check_simulation_equivalence` runs a protocol and evaluates its
  circuit with the same coefficient oracle and compares every packet.
* :func:`check_mincut_equivalences` compares min-cuts of the information
  flow graphs and the transforms at every vertex copy.
* :func:`optimality_campaign` measures how often the achieved rank meets the
  min-cut bound over many random schedules.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from . import circuits
from .circuits import UNBOUNDED, CoefficientOracle, evaluate
from .flow import min_cut
from .gf import GF
from .protocols import Accumulator, Pnc, Protocol, Recombinator, protocol_from_name, random_messages, run
from .schedule import (
    Schedule,
    VertexCopy,
    build_hypergraph,
    drop_uninformed_sends,
    gen_gossip,
    gen_random_dynamic,
)

EPSILON_TARGETS = {16: 0.01, 8: 0.05, 4: None}


class InvariantViolation(AssertionError):
    pass


@lru_cache(maxsize=None)
def field_for(m: int) -> GF:
    return GF(m)


def derive_seed(master: int, counter: int) -> int:
    """Per-trial seed derived from the master seed by counter."""
    return int(np.random.SeedSequence([int(master), int(counter)]).generate_state(1)[0])


def transform_for(teg, protocol: Protocol):
    if isinstance(protocol, Pnc):
        return circuits.pnc_transform(teg)
    if isinstance(protocol, Recombinator):
        return circuits.recombinator_transform(teg, protocol.mu)
    return circuits.accumulator_transform(teg, protocol.mu)


# simulation equivalence


@dataclass
class SimulationCheck:
    passed: bool
    packets_compared: int
    stores_compared: int
    first_divergence: str | None = None


def check_simulation_equivalence(
    s: Schedule,
    messages,
    seed: int,
    field: GF | None = None,
    protocol: Protocol = Pnc(),
    circuit_oracle: CoefficientOracle | None = None,
) -> SimulationCheck:
    """Run the protocol and evaluate its transform with matched randomness.

    Passes iff every transmitted packet equals the value of its circuit
    hyperedge and every node's knowledge at (v, t) equals the values on v_t's
    state edges, symbol for symbol.  ``circuit_oracle`` replaces the oracle on
    the circuit side only (for negative controls).
    """
    field = field or field_for(16)
    oracle = CoefficientOracle(field, seed)
    trace = run(s, protocol, field, messages, seed, oracle=oracle)
    teg = build_hypergraph(s)
    c = transform_for(teg, protocol)
    values = evaluate(c, messages, circuit_oracle or oracle)

    tx_edge = {e.ref: e for e in c.edges if e.kind == "transmit"}
    checks = []  # (time, order, label, protocol rows, circuit rows)
    for ev_index, pkt in trace.emitted.items():
        e = tx_edge[ev_index]
        ev = s.events[ev_index]
        checks.append(
            ((ev.time, 1, ev.sender, ev_index), f"packet of event {ev_index} sent by {ev.sender}@{ev.time}",
             pkt.data[None, :], values[[e.index]])
        )
    for q, rows in trace.knowledge.items():
        checks.append(((q.time, 0, q.node, 0), f"knowledge of {q}", rows, values[c.state_edges(q)]))
    checks.sort(key=lambda x: x[0])
    first = None
    for _, label, got, want in checks:
        if got.shape != want.shape or not np.array_equal(got, want):
            first = label
            break
    return SimulationCheck(first is None, len(trace.emitted), len(trace.knowledge), first)


# min-cut equalities


@dataclass
class MincutCheck:
    mu: int | None
    values: dict[str, dict[VertexCopy, int]]
    groups: list[list[str]]
    mismatches: list[tuple[VertexCopy, list[str]]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.mismatches


def check_mincut_equivalences(s: Schedule, mu: int | None) -> MincutCheck:
    """Compare min-cuts at every vertex copy.

    Always checks G_inf == G_PNC, plus G_mu == G_mu-recombinator ==
    G_mu-accumulator (with G_mu = G_inf and width k when mu is unbounded).
    """
    teg = build_hypergraph(s)
    graphs = {
        "ginf": circuits.info_flow_graph(teg, UNBOUNDED),
        "gpnc": circuits.pnc_transform(teg),
        "grecomb": circuits.recombinator_transform(teg, mu),
        "gacc": circuits.accumulator_transform(teg, mu),
    }
    groups = [["ginf", "gpnc"]]
    if mu is None:
        groups.append(["ginf", "grecomb", "gacc"])
    else:
        graphs["gmu"] = circuits.info_flow_graph(teg, mu)
        groups.append(["gmu", "grecomb", "gacc"])
    points = [c for c in teg.copies if not c.is_source]
    values = {name: {q: min_cut(g, q) for q in points} for name, g in graphs.items()}
    result = MincutCheck(mu, values, groups)
    for q in points:
        for grp in groups:
            if len({values[g][q] for g in grp}) > 1:
                result.mismatches.append((q, grp))
    return result


# optimality campaigns


@dataclass
class CampaignConfig:
    protocol: str = "pnc"
    mu: int | str | None = None  # int, "k" (per-trial k), or None (unbounded)
    field: int = 16
    trials: int = 100
    seed: int = 0
    generator: str = "mixed"  # mixed | gossip | random
    n_max: int = 10
    k_max: int = 4
    l: int = 2  # noqa: E741
    max_events: int = 100
    queries: str = "final"  # final | all
    destinations: list[int] | None = None
    epsilon_target: float | None = -1.0  # -1: per-field default
    workers: int = 1

    def target(self) -> float | None:
        if self.epsilon_target is not None and self.epsilon_target < 0:
            return EPSILON_TARGETS.get(self.field)
        return self.epsilon_target


@dataclass
class TrialRecord:
    schedule_id: int
    protocol: str
    mu: int | None
    field: int
    seed: int
    node: int
    tick: int
    rank: int
    min_cut: int

    @property
    def equal(self) -> bool:
        return self.rank == self.min_cut


def campaign_schedule(config: CampaignConfig, seed: int) -> Schedule:
    rng = random.Random(seed)
    n = rng.randint(2, config.n_max)
    k = rng.randint(1, config.k_max)
    kind = config.generator
    if kind == "mixed":
        kind = rng.choice(["gossip", "random"])
    if kind == "gossip":
        rounds = rng.randint(1, max(1, min(10, config.max_events // n)))
        s = gen_gossip(n, k, rounds, fanout=rng.choice([1, 2]), seed=seed, l=config.l)
    elif kind == "random":
        s = gen_random_dynamic(n, k, rng.randint(5, config.max_events), rng.randint(1, 3), seed=seed, l=config.l)
    else:
        raise ValueError(f"unknown generator {config.generator!r}")
    return drop_uninformed_sends(s)


def _resolve_mu(config: CampaignConfig, k: int) -> int | None:
    if config.protocol == "pnc":
        return None
    if config.mu == "k" or config.mu is None:
        return k
    return int(config.mu)


def run_trial(config: CampaignConfig, index: int) -> list[TrialRecord]:
    """One campaign trial: a fresh schedule, a protocol run, and its cut bounds."""
    seed = derive_seed(config.seed, index)
    s = campaign_schedule(config, seed)
    field = field_for(config.field)
    mu = _resolve_mu(config, s.k)
    protocol = protocol_from_name(config.protocol, mu, s.k)
    trace = run(s, protocol, field, random_messages(field, s.k, s.l, seed), seed)
    bound = circuits.info_flow_graph(build_hypergraph(s), None if config.protocol == "pnc" else mu)
    points = trace.final_points() if config.queries == "final" else sorted(trace.rank, key=lambda c: (c.time, c.node))
    if config.destinations is not None:
        points = [q for q in points if q.node in config.destinations]
    return [
        TrialRecord(index, config.protocol, mu, config.field, seed, q.node, q.time, trace.rank[q], min_cut(bound, q))
        for q in points
    ]


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


@dataclass
class VerificationReport:
    config: CampaignConfig
    records: list[TrialRecord]
    trials: int
    successful_trials: int
    violations: int

    @property
    def success_rate(self) -> float:
        """Fraction of trials in which every query point reached its min-cut."""
        return self.successful_trials / self.trials if self.trials else 1.0

    @property
    def point_success_rate(self) -> float:
        if not self.records:
            return 1.0
        return sum(r.equal for r in self.records) / len(self.records)

    @property
    def epsilon_hat(self) -> float:
        return 1.0 - self.success_rate

    @property
    def ci95(self) -> tuple[float, float]:
        return wilson_interval(self.successful_trials, self.trials)

    @property
    def passed(self) -> bool:
        target = self.config.target()
        ok = target is None or self.success_rate >= 1 - target
        return self.violations == 0 and ok

    def summary(self) -> dict:
        return {
            "config": asdict(self.config),
            "trials": self.trials,
            "observations": len(self.records),
            "success_rate": self.success_rate,
            "point_success_rate": self.point_success_rate,
            "epsilon_hat": self.epsilon_hat,
            "epsilon_target": self.config.target(),
            "violations": self.violations,
            "ci95": list(self.ci95),
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# " + json.dumps({"config": asdict(self.config)}, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["schedule_id", "protocol", "mu", "field", "seed", "node", "tick", "rank", "min_cut", "equal"])
        for r in self.records:
            mu = "inf" if r.mu is None else r.mu
            w.writerow([r.schedule_id, r.protocol, mu, r.field, r.seed, r.node, r.tick, r.rank, r.min_cut, int(r.equal)])
        return buf.getvalue()


def _trial_batch(args):
    config, indices = args
    return [run_trial(config, i) for i in indices]


def optimality_campaign(config: CampaignConfig, strict: bool = False) -> VerificationReport:
    """Run ``config.trials`` trials and aggregate rank-vs-min-cut records.

    Cut-bound violations (rank above the cut) are counted; with ``strict`` the
    first one raises InvariantViolation instead.
    """
    indices = list(range(config.trials))
    workers = config.workers or os.cpu_count() or 1
    if workers > 1 and config.trials > 1:
        chunks = [(config, indices[i::workers]) for i in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            per_trial = {}
            for (cfg, idx), batch in zip(chunks, pool.map(_trial_batch, chunks)):
                per_trial.update(zip(idx, batch))
        results = [per_trial[i] for i in indices]
    else:
        results = [run_trial(config, i) for i in indices]

    records: list[TrialRecord] = []
    successes = violations = 0
    for recs in results:
        bad = [r for r in recs if r.rank > r.min_cut]
        if bad and strict:
            r = bad[0]
            raise InvariantViolation(f"trial {r.schedule_id}: rank {r.rank} > min-cut {r.min_cut} at {r.node}@{r.tick}")
        violations += len(bad)
        successes += all(r.equal for r in recs)
        records.extend(recs)
    return VerificationReport(config, records, len(results), successes, violations)


def simulation_campaign(schedules: int, seeds: int, master_seed: int = 0, m: int = 16, protocol: str = "pnc", mu=None):
    """Protocol-vs-circuit equivalence over random schedules x seeds."""
    cfg = CampaignConfig(protocol=protocol, mu=mu, field=m, seed=master_seed)
    field = field_for(m)
    results = []
    for i in range(schedules):
        s = campaign_schedule(cfg, derive_seed(master_seed, i))
        prot = protocol_from_name(protocol, _resolve_mu(cfg, s.k), s.k)
        for j in range(seeds):
            seed = derive_seed(master_seed + 1, i * seeds + j)
            msgs = random_messages(field, s.k, s.l, seed)
            results.append((i, seed, check_simulation_equivalence(s, msgs, seed, field, prot)))
    return results


def mincut_campaign(schedules: int, mus=(1, 2, 3, None), master_seed: int = 0, n_max: int = 8, max_events: int = 40):
    """Min-cut equalities over random schedules and buffer sizes."""
    cfg = CampaignConfig(seed=master_seed, n_max=n_max, max_events=max_events)
    results = []
    for i in range(schedules):
        s = campaign_schedule(cfg, derive_seed(master_seed, i))
        for mu in mus:
            results.append((i, mu, check_mincut_equivalences(s, mu)))
    return results
