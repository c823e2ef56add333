from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from pnclab.cli import main
from pnclab.schedule import Schedule, gen_line


def run_cli(capsys, *args):
    code = main(list(args))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text: str):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(body))


@pytest.fixture
def example_a_file(tmp_path, capsys):
    path = tmp_path / "a.json"
    assert main(["gen", "line", "--n", "2", "--k", "2", "--reps", "3", "--l", "2", "--out", str(path)]) == 0
    return path


@pytest.fixture
def example_b_file(tmp_path):
    from conftest import line_schedule

    path = tmp_path / "b.json"
    path.write_text(line_schedule(2, [1, 2]).dumps())
    return path


def test_gen_line_is_example_a(example_a_file):
    s = Schedule.loads(example_a_file.read_text())
    assert s == gen_line(2, 2, 3, l=2)
    assert s.meta["config"]["command"] == "gen"


def test_gen_is_deterministic(tmp_path, capsys):
    args = ["gen", "gossip", "--n", "10", "--k", "4", "--rounds", "20", "--seed", "7"]
    _, first, _ = run_cli(capsys, *args)
    _, second, _ = run_cli(capsys, *args)
    assert first == second
    assert Schedule.loads(first).meta["config"]["seed"] == 7


def test_seed_falls_back_to_environment(capsys, monkeypatch):
    monkeypatch.setenv("PNCLAB_SEED", "7")
    _, env, _ = run_cli(capsys, "gen", "gossip", "--n", "5", "--k", "2")
    monkeypatch.delenv("PNCLAB_SEED")
    _, flag, _ = run_cli(capsys, "gen", "gossip", "--n", "5", "--k", "2", "--seed", "7")
    assert env == flag


def test_gen_rejects_single_node(capsys):
    code, _, err = run_cli(capsys, "gen", "gossip", "--n", "1")
    assert code == 2 and "n >= 2" in err


def test_mincut_example_a(example_a_file, capsys):
    code, out, _ = run_cli(capsys, "mincut", "--schedule", str(example_a_file), "--graph", "ginf")
    assert code == 0
    got = {(r["node"], r["tick"]): r["value"] for r in rows(out)}
    assert (got[("1", "2")], got[("1", "3")], got[("1", "4")]) == ("1", "2", "2")
    assert json.loads(out.splitlines()[0][2:])["config"]["graph"] == "ginf"


@pytest.mark.parametrize("graph", ["gmu", "grecomb", "gacc"])
def test_mincut_example_b(example_b_file, capsys, graph):
    code, out, _ = run_cli(capsys, "mincut", "--schedule", str(example_b_file), "--graph", graph, "--mu", "1")
    assert code == 0
    assert {(r["node"], r["tick"]): r["value"] for r in rows(out)}[("1", "3")] == "1"


def test_mincut_usage_and_input_errors(example_a_file, tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["mincut", "--schedule", str(example_a_file), "--graph", "gfoo"])
    assert info.value.code == 2
    assert run_cli(capsys, "mincut", "--schedule", str(example_a_file), "--graph", "gmu")[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 2, "k": 1, "l": 1, "events": []}')
    assert run_cli(capsys, "mincut", "--schedule", str(bad))[0] == 3
    bad.write_text("not json")
    assert run_cli(capsys, "mincut", "--schedule", str(bad))[0] == 3
    assert run_cli(capsys, "mincut", "--schedule", str(tmp_path / "missing.json"))[0] == 3


def test_run_is_deterministic_and_below_cuts(example_a_file, capsys):
    args = ["run", "--schedule", str(example_a_file), "--protocol", "pnc", "--seed", "5"]
    _, first, _ = run_cli(capsys, *args)
    _, second, _ = run_cli(capsys, *args)
    assert first == second
    _, cuts, _ = run_cli(capsys, "mincut", "--schedule", str(example_a_file))
    cut = {(r["node"], r["tick"]): int(r["value"]) for r in rows(cuts)}
    for r in rows(first):
        assert int(r["rank"]) <= cut[(r["node"], r["tick"])]


def test_run_rejects_bad_protocol(example_a_file):
    with pytest.raises(SystemExit) as info:
        main(["run", "--schedule", str(example_a_file), "--protocol", "flood"])
    assert info.value.code == 2


def test_verify_writes_reports(tmp_path, capsys):
    out = tmp_path / "rep"
    code, text, _ = run_cli(
        capsys, "verify", "all", "--trials", "6", "--seeds", "2", "--workers", "1", "--seed", "3", "--out", str(out)
    )
    assert code == 0
    assert sorted(p.name for p in out.iterdir()) == ["cuts.csv", "optimality.csv", "optimality.json", "simulate.csv"]
    for name in ("cuts.csv", "optimality.csv", "simulate.csv"):
        header = (out / name).read_text().splitlines()[0]
        assert json.loads(header[2:])["config"]["seed"] == 3
    summary = json.loads((out / "optimality.json").read_text())
    assert summary["run_config"]["check"] == "all" and summary["violations"] == 0


def test_verify_output_is_replayable(tmp_path, capsys):
    for d in ("one", "two"):
        run_cli(capsys, "verify", "optimality", "--trials", "5", "--seed", "9", "--workers", "1", "--out", str(tmp_path / d))
    for name in ("optimality.csv", "optimality.json"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "pnclab", "gen", "line", "--n", "2"], capture_output=True, text=True)
    assert res.returncode == 0
    assert Schedule.loads(res.stdout).n == 2
