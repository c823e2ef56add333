"""Command-line frontend: ``pnclab gen | mincut | run | verify``.

Every output embeds the run configuration (schedules in their ``meta``
field, CSV files in a leading ``#`` comment line, JSON reports under
``config``) so a run can be replayed exactly.  Exit codes: 0 success,
1 verification failure, 2 usage error, 3 invalid input data.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

from . import circuits, verify
from .flow import cuts_csv, min_cuts
from .protocols import protocol_from_name, random_messages, run
from .schedule import (
    InvalidSchedule,
    Schedule,
    ScheduleFormatError,
    build_hypergraph,
    check,
    gen_gossip,
    gen_line,
    gen_random_dynamic,
)

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_INPUT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


def _mu(text: str) -> int | str | None:
    """``--mu`` accepts a positive integer, ``k`` (mu = k) or ``inf``."""
    if text in ("inf", "unbounded"):
        return None
    if text == "k":
        return "k"
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid mu {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("mu must be >= 1")
    return value


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("PNCLAB_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"PNCLAB_SEED must be an integer, got {env!r}") from None


def _config(args, **extra) -> dict:
    """The serializable run configuration of a parsed command line."""
    skip = {"func", "out", "workers"}  # workers never change results
    cfg = {k: v for k, v in vars(args).items() if k not in skip}
    cfg.update(extra)
    return cfg


def _header(cfg: dict) -> str:
    return "# " + json.dumps({"config": cfg}, sort_keys=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_text(text)


def _load(path: str) -> Schedule:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read schedule: {exc}") from None
    try:
        return check(Schedule.loads(text))
    except json.JSONDecodeError as exc:
        raise InputError(f"schedule is not valid JSON: {exc}") from None
    except (ScheduleFormatError, InvalidSchedule) as exc:
        raise InputError(str(exc)) from None


# subcommands


def cmd_gen(args) -> int:
    seed = _seed(args)
    try:
        if args.generator == "line":
            s = gen_line(args.n, args.k, args.reps, l=args.l)
        elif args.generator == "gossip":
            s = gen_gossip(args.n, args.k, args.rounds, fanout=args.fanout, seed=seed, l=args.l)
        else:
            s = gen_random_dynamic(args.n, args.k, args.events, max_delay=args.max_delay, seed=seed, l=args.l)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cfg = _config(args, command="gen", seed=seed)
    s = Schedule(s.n, s.k, s.l, s.events, {"config": cfg})
    _emit(s.dumps(), args.out)
    return EXIT_OK


def cmd_mincut(args) -> int:
    s = _load(args.schedule)
    mu = args.mu
    if mu == "k":
        mu = s.k
    if args.graph == "gmu" and mu is None:
        raise UsageError("graph gmu needs a finite --mu")
    g = circuits.build(build_hypergraph(s), args.graph, mu)
    cuts = min_cuts(g)
    rows = sorted(cuts.items(), key=lambda kv: (kv[0].node, kv[0].time))
    _emit(_header(_config(args, command="mincut")) + cuts_csv(rows), args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    s = _load(args.schedule)
    seed = _seed(args)
    mu = s.k if args.mu == "k" else args.mu
    try:
        protocol = protocol_from_name(args.protocol, mu, s.k)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    field = verify.field_for(args.field)
    trace = run(s, protocol, field, random_messages(field, s.k, s.l, seed), seed)
    _emit(_header(_config(args, command="run", seed=seed)) + trace.ranks_csv(), args.out)
    return EXIT_OK


def _write_report(out_dir: str | None, name: str, text: str) -> None:
    if out_dir is None:
        return
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    (path / name).write_text(text)


def _verify_simulate(args, seed: int, cfg: dict) -> bool:
    schedules = args.trials or 100
    results = verify.simulation_campaign(
        schedules, args.seeds, master_seed=seed, m=args.field, protocol=args.protocol, mu=args.mu
    )
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["schedule_id", "seed", "passed", "packets", "stores", "first_divergence"])
    failures = 0
    for i, trial_seed, res in results:
        failures += not res.passed
        w.writerow([i, trial_seed, int(res.passed), res.packets_compared, res.stores_compared, res.first_divergence or ""])
    _write_report(args.out, "simulate.csv", _header(cfg) + buf.getvalue())
    print(f"simulate: {len(results) - failures}/{len(results)} runs match their circuit")
    return failures == 0


def _verify_cuts(args, seed: int, cfg: dict) -> bool:
    schedules = args.trials or 200
    mus = (1, 2, 3, None) if args.mu is None or args.mu == "k" else (args.mu,)
    results = verify.mincut_campaign(schedules, mus=mus, master_seed=seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["schedule_id", "mu", "points", "mismatches"])
    failures = 0
    for i, mu, res in results:
        failures += not res.passed
        points = len(next(iter(res.values.values())))
        w.writerow([i, "inf" if mu is None else mu, points, len(res.mismatches)])
    _write_report(args.out, "cuts.csv", _header(cfg) + buf.getvalue())
    print(f"cuts: {len(results) - failures}/{len(results)} (schedule, mu) pairs with equal min-cuts")
    return failures == 0


def _verify_optimality(args, seed: int, cfg: dict) -> bool:
    config = verify.CampaignConfig(
        protocol=args.protocol,
        mu=args.mu,
        field=args.field,
        trials=args.trials or 1000,
        seed=seed,
        workers=args.workers,
    )
    report = verify.optimality_campaign(config)
    _write_report(args.out, "optimality.csv", _header(cfg) + report.to_csv())
    summary = report.summary()
    summary["run_config"] = cfg
    _write_report(args.out, "optimality.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    lo, hi = report.ci95
    print(
        f"optimality: success {report.success_rate:.4f} (95% CI {lo:.4f}-{hi:.4f}), "
        f"violations {report.violations}, passed={report.passed}"
    )
    return report.passed


def cmd_verify(args) -> int:
    seed = _seed(args)
    cfg = _config(args, command="verify", seed=seed)
    checks = {
        "simulate": [_verify_simulate],
        "cuts": [_verify_cuts],
        "optimality": [_verify_optimality],
        "all": [_verify_simulate, _verify_cuts, _verify_optimality],
    }[args.check]
    ok = True
    for fn in checks:
        ok = fn(args, seed, cfg) and ok
    return EXIT_OK if ok else EXIT_FAILED


# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pnclab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--out", help="output file (default: stdout)")
        if seed:
            sp.add_argument("--seed", type=int, default=None, help="master seed (default: $PNCLAB_SEED or 0)")

    g = sub.add_parser("gen", help="generate a schedule")
    gsub = g.add_subparsers(dest="generator", required=True)
    line = gsub.add_parser("line", help="repeated transmissions along a chain")
    line.add_argument("--reps", type=int, default=1)
    gossip = gsub.add_parser("gossip", help="synchronous push gossip rounds")
    gossip.add_argument("--rounds", type=int, default=10)
    gossip.add_argument("--fanout", type=int, default=1)
    rnd = gsub.add_parser("random", help="random oblivious event sequence")
    rnd.add_argument("--events", type=int, default=30)
    rnd.add_argument("--max-delay", type=int, default=3)
    for sp in (line, gossip, rnd):
        sp.add_argument("--n", type=int, required=True)
        sp.add_argument("--k", type=int, default=2)
        sp.add_argument("--l", type=int, default=4)
        common(sp)
        sp.set_defaults(func=cmd_gen)

    mc = sub.add_parser("mincut", help="min-cut at every vertex copy of a graph")
    mc.add_argument("--schedule", required=True)
    mc.add_argument("--graph", choices=circuits.GRAPHS, default="ginf")
    mc.add_argument("--mu", type=_mu, default=None)
    common(mc, seed=False)
    mc.set_defaults(func=cmd_mincut)

    r = sub.add_parser("run", help="run a protocol and print per-copy ranks")
    r.add_argument("--schedule", required=True)
    r.add_argument("--protocol", choices=("pnc", "recomb", "acc"), default="pnc")
    r.add_argument("--mu", type=_mu, default=None)
    r.add_argument("--field", type=int, choices=(4, 8, 16), default=16)
    common(r)
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run verification campaigns")
    v.add_argument("check", choices=("simulate", "cuts", "optimality", "all"))
    v.add_argument("--protocol", choices=("pnc", "recomb", "acc"), default="pnc")
    v.add_argument("--mu", type=_mu, default=None)
    v.add_argument("--field", type=int, choices=(4, 8, 16), default=16)
    v.add_argument("--trials", type=int, default=None, help="schedules or trials per check")
    v.add_argument("--seeds", type=int, default=10, help="seeds per schedule for simulate")
    v.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--out", help="directory for report files")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on bad usage
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"pnclab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"pnclab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
