import csv
import io
import json
import time

import numpy as np
import pytest

from gkslgate.annealing import local_search_budget
from gkslgate.cli import main
from gkslgate.records import load_records, write_controls
from gkslgate.schedule import ControlSchedule

SMALL = ["--k", "3", "--t", "5", "--maxfun", "150", "--maxiter", "40"]


def stable(record):
    d = dict(vars(record))
    d.pop("timestamp")
    d.pop("wall_time")
    return d


def zero_controls(path, T=20.0, K=4):
    write_controls(path, ControlSchedule.constant(K, T=T))
    return path


def test_simulate_zero_controls_oracle(tmp_path, capsys):
    ctl = zero_controls(tmp_path / "zero.ctl", T=2.0, K=2)
    out = tmp_path / "states.json"
    rc = main(["simulate", "--system", "1", "--gate", "cz", "--eps", "0", "--controls", str(ctl),
               "--oracle-check", "--substeps", "2000", "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "objective F =" in text and "discrepancy" in text
    dump = json.loads(out.read_text())
    assert np.isfinite(dump["objective"])
    assert dump["oracle_discrepancy"] <= 1e-6
    assert len(dump["states"]) == 3
    for s in dump["states"]:
        assert len(s["real16"]) == 16
        assert np.array(s["matrix"]).shape == (4, 4, 2)


def test_simulate_malformed_file(tmp_path, capsys):
    ctl = tmp_path / "bad.ctl"
    ctl.write_text("T 20\nK 2\nu_max 20\nn_max 20\n0 0 0\n0 zero 0\n")
    out = tmp_path / "states.json"
    rc = main(["simulate", "--system", "2", "--gate", "cnot", "--eps", "0.1",
               "--controls", str(ctl), "--out", str(out)])
    assert rc != 0
    assert "line" in capsys.readouterr().err
    assert not out.exists()
    assert list(tmp_path.iterdir()) == [ctl]


def test_simulate_missing_header_field(tmp_path, capsys):
    ctl = tmp_path / "bad.ctl"
    ctl.write_text("T 20\nu_max 20\nn_max 20\n0 0 0\n")
    rc = main(["simulate", "--system", "2", "--gate", "cnot", "--eps", "0",
               "--controls", str(ctl), "--out", str(tmp_path / "o.json")])
    assert rc != 0
    assert "K" in capsys.readouterr().err


@pytest.mark.parametrize("flag", ["0", "-1"])
def test_zero_horizon_rejected(tmp_path, flag):
    ctl = zero_controls(tmp_path / "zero.ctl")
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--system", "1", "--gate", "cz", "--eps", "0", "--controls", str(ctl),
              "--t", flag, "--out", str(tmp_path / "o.json")])
    assert exc.value.code != 0
    with pytest.raises(SystemExit):
        main(["optimize", "--system", "1", "--gate", "cz", "--eps", "0", "--t", flag])


def test_optimize_defaults_echo(monkeypatch, capsys):
    import gkslgate.cli as cli

    seen = {}

    def fake_anneal(problem, bnds, cfg):
        seen["cfg"], seen["template"] = cfg, problem.template
        raise KeyboardInterrupt

    monkeypatch.setattr(cli, "dual_anneal", fake_anneal)
    with pytest.raises(KeyboardInterrupt):
        main(["optimize", "--system", "2", "--gate", "cnot", "--eps", "0.05", "--seed", "1"])
    first = capsys.readouterr().out.splitlines()[0]
    assert first == "initial_temp=30000 maxfun=30000 maxiter=3000 K=200 T=20 u_max=20 n_max=20"
    assert seen["cfg"].seed == 1 and seen["template"].dim == 600


def test_optimize_seed_determinism(tmp_path, capsys):
    out = tmp_path / "runs.jsonl"
    base = ["optimize", "--system", "3", "--gate", "swap", "--eps", "0.05", "--seed", "7",
            *SMALL, "--out", str(out)]
    assert main(base) == 0
    assert main(base) == 0
    a, b = load_records(out)
    assert stable(a) == stable(b)
    assert a.seed == 7 and len(a.best_params) == 9
    assert "best_value" in capsys.readouterr().out


def test_optimize_smoke_budget(tmp_path):
    out = tmp_path / "runs.jsonl"
    start = time.perf_counter()
    assert main(["optimize", "--system", "2", "--gate", "cnot", "--eps", "0", "--seed", "0",
                 "--k", "10", "--maxfun", "500", "--out", str(out)]) == 0
    assert time.perf_counter() - start < 60
    (rec,) = load_records(out)
    # the closing polish may run past maxfun by at most its own cap
    assert rec.ok and rec.n_evals <= 500 + local_search_budget(30)


def run_sweep(tmp_path, name, workers):
    out = tmp_path / name
    rc = main(["sweep", "--system", "2", "--gate", "cnot", "--eps-list", "0,0.05,0.1",
               "--trials", "2", "--base-seed", "3", "--workers", str(workers), *SMALL,
               "--out", str(out)])
    assert rc == 0
    return out


def test_sweep_counts_and_summary(tmp_path):
    out = run_sweep(tmp_path, "s.jsonl", 1)
    recs = load_records(out)
    assert len(recs) == 6
    assert [r.eps for r in recs] == [0.0, 0.0, 0.05, 0.05, 0.1, 0.1]
    rows = list(csv.DictReader(io.StringIO((tmp_path / "s.jsonl.summary.csv").read_text())))
    assert len(rows) == 3
    for row, eps in zip(rows, (0.0, 0.05, 0.1)):
        assert float(row["eps"]) == eps
        assert float(row["min_min"]) <= float(row["mean_min"]) <= float(row["max_min"])


def test_sweep_workers_identical(tmp_path):
    one = load_records(run_sweep(tmp_path, "w1.jsonl", 1))
    four = load_records(run_sweep(tmp_path, "w4.jsonl", 4))
    assert [stable(r) for r in one] == [stable(r) for r in four]


def test_sweep_full_protocol_dry_run(tmp_path, capsys):
    out = tmp_path / "full.jsonl"
    rc = main(["sweep", "--system", "2", "--gate", "cnot", "--dry-run", "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "11 eps values x 10 trials = 110 trials" in text
    assert "estimated runtime" in text
    assert not out.exists()


def test_report_tables(tmp_path):
    out = run_sweep(tmp_path, "s.jsonl", 1)
    stats_path, trials_path = tmp_path / "stats.csv", tmp_path / "trials.csv"
    assert main(["report", "--in", str(out), "--figure", "stats", "--out", str(stats_path)]) == 0
    assert main(["report", "--in", str(out), "--figure", "trials", "--out", str(trials_path)]) == 0
    stats_rows = list(csv.reader(io.StringIO(stats_path.read_text(), newline="")))
    trial_rows = list(csv.reader(io.StringIO(trials_path.read_text(), newline="")))
    assert stats_rows[0] == ["eps", "min_min", "max_min", "mean_min"]
    assert trial_rows[0] == ["eps", "trial_index", "best_value"]
    assert len(stats_rows) == 4 and len(trial_rows) == 7
    assert stats_path.read_bytes().count(b"\r\n") == 4


def test_report_unknown_figure(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["report", "--in", str(tmp_path / "x.jsonl"), "--figure", "heatmap",
              "--out", str(tmp_path / "x.csv")])
    assert exc.value.code != 0


def test_report_missing_store(tmp_path, capsys):
    rc = main(["report", "--in", str(tmp_path / "none.jsonl"), "--figure", "stats",
               "--out", str(tmp_path / "x.csv")])
    assert rc == 2
    assert "cannot read" in capsys.readouterr().err
