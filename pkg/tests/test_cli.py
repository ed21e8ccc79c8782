import filecmp

import pytest

from satlink.cli import _int_list, main
from satlink.metrics import read_sweep, read_table
from satlink.phy import PlrCurve


def test_int_list():
    assert _int_list("1..4") == [1, 2, 3, 4]
    assert _int_list("1,5..7,10") == [1, 5, 6, 7, 10]


def test_run_writes_files(tmp_path, capsys):
    assert main(["run", "--access", "musca3", "--sessions", "10", "--duration-s", "2",
                 "--output-dir", str(tmp_path)]) == 0
    names = {p.name for p in tmp_path.iterdir()}
    assert {"summary.csv", "sessions.csv", "frames.csv", "trace.csv", "scenario.cfg"} <= names
    assert "musca3" in capsys.readouterr().out


def test_run_twice_identical(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("access_method = crdsa3\nnum_sessions = 150\nduration_s = 3\n")
    for d in ("a", "b"):
        assert main(["run", "--scenario", str(cfg), "--seed", "7", "--output-dir", str(tmp_path / d)]) == 0
    cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
    assert not cmp.diff_files and not cmp.left_only and not cmp.right_only


def test_env_seed(tmp_path, monkeypatch):
    monkeypatch.setenv("SATLINK_SEED", "42")
    assert main(["run", "--sessions", "2", "--duration-s", "1", "--output-dir", str(tmp_path)]) == 0
    assert "seed = 42" in (tmp_path / "scenario.cfg").read_text()
    assert main(["run", "--sessions", "2", "--duration-s", "1", "--seed", "5",
                 "--output-dir", str(tmp_path)]) == 0
    assert "seed = 5" in (tmp_path / "scenario.cfg").read_text()


def test_bad_scenario_lists_violations(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("num_sessions = -3\nra_block_slots = 3000\n")
    assert main(["run", "--scenario", str(cfg), "--output-dir", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "num_sessions must be positive" in err and "ra_block_slots=3000" in err


def test_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["run", "--scenario", str(cfg)]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_oracle(tmp_path):
    assert main(["oracle", "--method", "crdsa3", "--loads", "1..5", "--trials", "200",
                 "--output-dir", str(tmp_path)]) == 0
    curve = PlrCurve.load(tmp_path / "oracle_crdsa3.csv")
    assert curve.loads == [1, 2, 3, 4, 5] and curve.plr[0] == 0.0
    assert main(["oracle", "--method", "dedicated", "--output-dir", str(tmp_path)]) == 2


def test_sweep_and_table(tmp_path):
    args = ["--access", "dedicated,musca3", "--sessions", "20,40", "--duration-s", "2",
            "--output-dir", str(tmp_path)]
    assert main(["sweep", *args, "--jobs", "2", "--replications", "2"]) == 0
    rows = read_sweep(tmp_path / "sweep.csv")
    assert [(a, n) for a, n, _, _ in rows] == [("dedicated", 20), ("dedicated", 40),
                                              ("musca3", 20), ("musca3", 40)]
    assert (tmp_path / "sweep_replications.csv").exists()
    assert main(["table", *args]) == 0
    assert len(read_table(tmp_path / "table.csv")) == 4


def test_trace_command(tmp_path):
    assert main(["trace", "--access", "musca3", "--sessions", "5", "--duration-s", "2",
                 "--output-dir", str(tmp_path)]) == 0
    lines = (tmp_path / "reception.csv").read_text().splitlines()
    assert lines[0] == "n,mean_time_s" and lines[1] == "1,0.385000"


def test_table_plr_mode(tmp_path):
    PlrCurve([1, 100], [0.0, 0.0]).save(tmp_path / "zero.csv")
    assert main(["run", "--access", "crdsa3", "--sessions", "300", "--duration-s", "2",
                 "--loss-model", "table", "--plr-table", str(tmp_path / "zero.csv"),
                 "--output-dir", str(tmp_path)]) == 0
    summary = dict(line.split(",", 1) for line in (tmp_path / "summary.csv").read_text().splitlines())
    assert float(summary["loss_ratio"]) == 0.0


def test_missing_plr_table(tmp_path):
    assert main(["run", "--access", "crdsa3", "--loss-model", "table",
                 "--plr-table", str(tmp_path / "nope.csv"), "--output-dir", str(tmp_path)]) == 2
