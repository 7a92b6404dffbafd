import json
import subprocess
import sys

import pytest

from coopvrp.cli import EXIT_INPUT, EXIT_USAGE, main

from conftest import data_path

X101 = data_path("X-n101-k25.vrp")
BKS = data_path("bks_x.csv")


def test_solution_files_are_reproducible(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"s{k}.sol"
        assert main(["solve", X101, "--seed", "4", "--iters", "60", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert outs[0].decode().startswith("Route #1: ")
    assert outs[0].decode().splitlines()[-1].startswith("Cost ")


def test_report_carries_gap(tmp_path):
    rep = tmp_path / "r.json"
    assert main(["solve", X101, "--iters", "40", "--bks", BKS, "--report", str(rep), "--solvers", "2"]) == 0
    data = json.loads(rep.read_text())
    assert data["instance"] == "X-n101-k25" and data["x"] == 2
    assert data["gap_pct"] == pytest.approx(100 * (data["cost"] - 27591) / 27591)


def test_multiple_runs_report(tmp_path, capsys):
    rep = tmp_path / "r.json"
    assert main(["solve", X101, "--iters", "20", "--runs", "2", "--report", str(rep)]) == 0
    data = json.loads(rep.read_text())
    assert [d["seed"] for d in data] == [0, 1]
    assert len(capsys.readouterr().out.splitlines()) == 2


def test_missing_file_exits_2(capsys):
    assert main(["solve", "does-not-exist.vrp"]) == EXIT_INPUT


def test_malformed_instance_exits_2(tmp_path):
    bad = tmp_path / "bad.vrp"
    bad.write_text("NAME : x\nDIMENSION : 3\nCAPACITY : 5\n")
    assert main(["solve", str(bad)]) == EXIT_INPUT


@pytest.mark.parametrize(
    "argv",
    [[], ["solve"], ["solve", X101, "--solvers", "0"], ["solve", X101, "--iters", "5", "--long"], ["frobnicate"]],
)
def test_usage_errors_exit_3(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == EXIT_USAGE


def test_module_entry_point(tmp_path):
    manifest = tmp_path / "m.json"
    manifest.write_text(json.dumps({"instances": [X101], "solvers": [1], "seeds": [0], "iters": 10}))
    res = subprocess.run([sys.executable, "-m", "coopvrp", "bench", str(manifest)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    header, row = res.stdout.splitlines()
    assert header.startswith("instance,x,seed,cost,gap_pct")
    assert row.startswith("X-n101-k25,1,0,")
