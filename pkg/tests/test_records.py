import csv
import io
import json

import numpy as np
import pytest

from gkslgate.annealing import AnnealConfig, dual_anneal
from gkslgate.dynamics import SystemSpec
from gkslgate.objective import GateProblem, ScheduleTemplate, bounds
from gkslgate.quantum import Gate
from gkslgate.records import (ControlsFileError, RecordError, RunRecord, append_records,
                              fingerprint, fmt, load_records, parse_controls, read_controls,
                              stats_csv, trials_csv, write_controls)
from gkslgate.schedule import ControlSchedule

TEMPLATE = ScheduleTemplate(T=4.0, K=3)


def make_record(eps=0.0, seed=1, trial=0, maxfun=120):
    problem = GateProblem(SystemSpec.standard(1, eps), Gate.SWAP, TEMPLATE)
    cfg = AnnealConfig(maxfun=maxfun, maxiter=20, seed=seed)
    res = dual_anneal(problem, bounds(problem), cfg)
    return RunRecord.from_trial(problem, cfg, res, trial_index=trial)


def test_round_trip(tmp_path):
    path = tmp_path / "runs.jsonl"
    recs = [make_record(0.0, 1, 0), make_record(0.1, 2, 1)]
    append_records(path, recs[:1])
    append_records(path, recs[1:])
    loaded = load_records(path)
    assert loaded == recs
    assert loaded[0].fingerprint == fingerprint(loaded[0].inputs)


def test_fingerprint_tamper_detected(tmp_path):
    path = tmp_path / "runs.jsonl"
    append_records(path, [make_record()])
    data = json.loads(path.read_text())
    data["inputs"]["system"]["eps"] = 0.5
    path.write_text(json.dumps(data) + "\n")
    with pytest.raises(RecordError, match="fingerprint"):
        load_records(path)


def test_spot_check_detects_wrong_value(tmp_path):
    path = tmp_path / "runs.jsonl"
    rec = make_record()
    rec.best_value += 1e-6
    append_records(path, [rec])
    with pytest.raises(RecordError, match="re-evaluation"):
        load_records(path)
    assert len(load_records(path, spot_check=0)) == 1


def test_append_is_atomic(tmp_path, monkeypatch):
    path = tmp_path / "runs.jsonl"
    append_records(path, [make_record()])
    before = path.read_text()

    def boom(*a, **k):
        raise KeyboardInterrupt

    monkeypatch.setattr("gkslgate.records.os.replace", boom)
    with pytest.raises(KeyboardInterrupt):
        append_records(path, [make_record(seed=9)])
    assert path.read_text() == before
    assert [p.name for p in tmp_path.iterdir()] == ["runs.jsonl"]


def test_schema_version_checked():
    with pytest.raises(RecordError):
        RunRecord.from_json('{"schema_version": 99}')


def test_fmt_round_trips():
    rng = np.random.default_rng(0)
    for x in rng.normal(size=100) * 10.0 ** rng.integers(-20, 20, 100):
        assert float(fmt(x)) == x
    assert fmt(0.1) == "0.10000000000000001"


def test_controls_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    sched = ControlSchedule.random(rng, 5, T=2.5)
    path = tmp_path / "c.txt"
    write_controls(path, sched)
    assert read_controls(path) == sched


@pytest.mark.parametrize("text, field", [
    ("T 20\nK 1\nu_max 20\n0 0 0\n", "n_max"),
    ("T 0\nK 1\nu_max 20\nn_max 20\n0 0 0\n", "T"),
    ("T 1\nK 2\nu_max 20\nn_max 20\n0 0 0\n", "K=2"),
    ("T 1\nK 1\nu_max 20\nn_max 20\n0 zero 0\n", "n1"),
    ("T 1\nK 1\nu_max 20\nn_max 20\n0 0\n", "line 5"),
    ("T 1\nK 1\nu_max 20\nn_max 20\n0 0 25\n", "n2"),
    ("T 1\nK 1.5\nu_max 20\nn_max 20\n0 0 0\n", "K"),
])
def test_controls_errors_name_field(text, field):
    with pytest.raises(ControlsFileError, match=field):
        parse_controls(text)


def test_controls_comments_allowed():
    s = parse_controls("# header\nT 1 # horizon\nK 1\nu_max 2\nn_max 3\n\n1 2 3\n")
    assert (s.T, s.K, s.u_max, s.n_max) == (1.0, 1, 2.0, 3.0)


def _strict_rows(text):
    assert text.endswith("\r\n")
    return list(csv.reader(io.StringIO(text, newline=""), strict=True))


def test_csv_tables_and_cross_consistency():
    recs = [make_record(eps, seed, trial) for eps in (0.0, 0.1) for trial, seed in
            enumerate((3, 4, 5))]
    trials = _strict_rows(trials_csv(recs))
    stats = _strict_rows(stats_csv(recs))
    assert trials[0] == ["eps", "trial_index", "best_value"]
    assert stats[0] == ["eps", "min_min", "max_min", "mean_min"]
    assert len(trials) == 7 and len(stats) == 3
    by_eps = {}
    for eps, _, value in trials[1:]:
        by_eps.setdefault(float(eps), []).append(float(value))
    for eps, lo, hi, mean in stats[1:]:
        vals = by_eps[float(eps)]
        assert abs(float(lo) - min(vals)) <= 1e-12
        assert abs(float(hi) - max(vals)) <= 1e-12
        assert abs(float(mean) - sum(vals) / len(vals)) <= 1e-12
        assert float(lo) <= float(mean) <= float(hi)


def test_single_trial_stats_row():
    rows = _strict_rows(stats_csv([make_record()]))
    assert len(rows) == 2 and rows[1][1] == rows[1][2] == rows[1][3]
