import json
import subprocess
import sys
from pathlib import Path

import pytest

from fairmatch import stats
from fairmatch.cli import main

ROOT = Path(__file__).resolve().parents[1]
SCEN = ROOT / "scenarios"


def test_run_fcfs_reports(tmp_path, capsys):
    assert main(["run", str(SCEN / "fcfs.toml"), "--races", "500", "--out-dir", str(tmp_path), "--log"]) == 0
    summary = json.loads((tmp_path / "fcfs.summary.json").read_text())
    cell = summary["fairness"]["slower_beats_faster"][0]
    assert (cell["slower"], cell["faster"], cell["rate"]) == ("P2", "P1", 0.0)
    for suffix in ("races.csv", "summary.txt", "books.json", "events.jsonl"):
        assert (tmp_path / f"fcfs.{suffix}").exists()
    assert len(stats.read_races_csv(tmp_path / "fcfs.races.csv")) == 500
    assert "slower-beats-faster" in capsys.readouterr().out


def test_policy_and_timer_override(tmp_path):
    assert main(["run", str(SCEN / "fcfs.toml"), "--races", "400", "--policy", "libra",
                 "--timer-ns", "1000000", "--out-dir", str(tmp_path), "--quiet"]) == 0
    s = json.loads((tmp_path / "fcfs.summary.json").read_text())
    assert s["policy"]["name"] == "libra" and s["policy"]["timer_ns"] == 1_000_000


def test_quiet_prints_nothing(tmp_path, capsys):
    assert main(["run", str(SCEN / "fcfs.toml"), "--races", "50", "--out-dir", str(tmp_path), "--quiet"]) == 0
    assert capsys.readouterr().out == ""


def test_batch_engine(tmp_path):
    assert main(["run", str(SCEN / "random_delay.toml"), "--races", "5000", "--engine", "batch",
                 "--out-dir", str(tmp_path), "--quiet"]) == 0
    s = json.loads((tmp_path / "random_delay.summary.json").read_text())
    assert s["engine"] == "batch" and s["fairness"]["races"] == 5000


def test_missing_file(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.toml")]) == 2
    assert "file not found" in capsys.readouterr().err


def test_bad_config_points_at_line(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('name = "x"\nraces = 10\n[policy]\nname = "fcfs"\nbogus = 3\n')
    assert main(["run", str(bad), "--out-dir", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error: ") and "bad.toml" in err


def test_sweep_verb(tmp_path):
    assert main(["sweep", str(SCEN / "sweep.toml"), "--races", "200", "--values", "1000000,5000000,10000000",
                 "--out-dir", str(tmp_path), "--quiet"]) == 0
    s = json.loads((tmp_path / "sweep.sweep.json").read_text())
    assert [r["T_ns"] for r in s["rows"]] == [1_000_000, 5_000_000, 10_000_000]
    assert s["multi_participant_non_decreasing"]
    assert (tmp_path / "sweep.sweep.csv").exists()


def test_attacks_verb(tmp_path):
    assert main(["attacks", str(SCEN / "attacks.toml"), "--races", "600", "--policy", "libra",
                 "--out-dir", str(tmp_path), "--quiet"]) == 0
    out = json.loads((tmp_path / "attacks.attacks.json").read_text())
    assert {o["policy"] for o in out["outcomes"]} == {"libra"}
    assert len(out["outcomes"]) == 4
    assert all(o["verdict"] == "resistant" for o in out["outcomes"])


def test_attacks_unknown_policy(tmp_path, capsys):
    assert main(["attacks", str(SCEN / "attacks.toml"), "--policy", "nope", "--out-dir", str(tmp_path)]) == 2
    assert "not in battery" in capsys.readouterr().err


def test_replay_verb(tmp_path):
    assert main(["run", str(SCEN / "libra.toml"), "--races", "200", "--log", "--out-dir", str(tmp_path),
                 "--quiet"]) == 0
    log = tmp_path / "libra.events.jsonl"
    assert main(["replay", str(log), "--out-dir", str(tmp_path), "--quiet"]) == 0
    rep = json.loads((tmp_path / "libra.events.replay.json").read_text())
    assert rep["identical"] and rep["latency_errors"] == []
    lines = log.read_text().splitlines()
    log.write_text("\n".join(lines[:-1]) + "\n")
    assert main(["replay", str(log), "--out-dir", str(tmp_path), "--quiet"]) == 1


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "fairmatch", "run", str(SCEN / "fcfs.toml"), "--races", "20",
                          "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0 and "wrote" in out.stdout


def test_unknown_verb_exits_nonzero():
    with pytest.raises(SystemExit) as exc:
        main(["dance"])
    assert exc.value.code != 0
