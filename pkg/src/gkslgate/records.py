"""On-disk formats: run records (line-delimited JSON), controls files and
figure-ready CSV tables.

Run record schema, version 1 (one JSON object per line)::

    schema_version  int, always 1
    timestamp       ISO-8601 UTC string
    fingerprint     sha256 hex of the canonical JSON of ``inputs``
    inputs          {"system": {...SystemSpec}, "gate": str, "template": {T, K, u_max, n_max},
                     "anneal": {...AnnealConfig incl. seed}, "eps_index": int,
                     "base_seed": int | null}
    gate, system, eps, trial_index, seed
    best_value      float (null for a failed trial)
    n_evals, n_iters, wall_time
    best_params     3K floats ordered u, n1, n2 (null for a failed trial)
    control_ranges  [u_min, u_max, n1_min, n1_max, n2_min, n2_max] or null
    error           null or the failure message
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .annealing import AnnealConfig, TrialResult
from .dynamics import SystemSpec
from .experiments import control_ranges, stats
from .objective import GateProblem, ScheduleTemplate, grk_infidelity
from .quantum import Gate
from .schedule import ControlSchedule, ScheduleError

SCHEMA_VERSION = 1
SPOT_CHECK_TOL = 1e-9


class RecordError(ValueError):
    pass


class ControlsFileError(ValueError):
    pass


def fmt(x: float) -> str:
    """17 significant digits: round-trips every double."""
    return f"{x:.17g}"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def fingerprint(inputs: dict) -> str:
    return hashlib.sha256(canonical_json(inputs).encode()).hexdigest()


def make_inputs(problem: GateProblem, cfg: AnnealConfig, eps_index: int = 0,
                base_seed: int | None = None) -> dict:
    return {
        "system": problem.spec.as_dict(),
        "gate": problem.gate.value,
        "template": asdict(problem.template),
        "anneal": cfg.as_dict(),
        "eps_index": eps_index,
        "base_seed": base_seed,
    }


@dataclass
class RunRecord:
    schema_version: int
    timestamp: str
    fingerprint: str
    inputs: dict
    gate: str
    system: int
    eps: float
    trial_index: int
    seed: int
    best_value: float | None
    n_evals: int
    n_iters: int
    wall_time: float
    best_params: list[float] | None
    control_ranges: list[float] | None
    error: str | None = None

    @classmethod
    def from_trial(cls, problem: GateProblem, cfg: AnnealConfig, result: TrialResult,
                   trial_index: int = 0, eps_index: int = 0,
                   base_seed: int | None = None) -> "RunRecord":
        inputs = make_inputs(problem, cfg, eps_index, base_seed)
        ok = result.ok
        return cls(
            schema_version=SCHEMA_VERSION,
            timestamp=datetime.now(timezone.utc).isoformat(),
            fingerprint=fingerprint(inputs),
            inputs=inputs,
            gate=problem.gate.value,
            system=int(problem.spec.variant),
            eps=problem.spec.eps,
            trial_index=trial_index,
            seed=result.seed,
            best_value=float(result.best_value) if ok else None,
            n_evals=result.n_evals,
            n_iters=result.n_iters,
            wall_time=result.wall_time,
            best_params=[float(v) for v in result.best_params] if ok else None,
            control_ranges=list(control_ranges(result, problem.template)) if ok else None,
            error=result.error,
        )

    @property
    def ok(self) -> bool:
        return self.error is None and self.best_value is not None

    def problem(self) -> GateProblem:
        return GateProblem(SystemSpec.from_dict(self.inputs["system"]), Gate(self.inputs["gate"]),
                           ScheduleTemplate(**self.inputs["template"]))

    def to_json(self) -> str:
        return json.dumps(asdict(self), separators=(",", ":"), allow_nan=False)

    @classmethod
    def from_json(cls, line: str) -> "RunRecord":
        data = json.loads(line)
        if data.get("schema_version") != SCHEMA_VERSION:
            raise RecordError(f"unsupported schema version {data.get('schema_version')!r}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise RecordError(f"malformed record: {exc}") from None


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write to a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".",
                               prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def append_records(path: str | os.PathLike, records) -> None:
    """Append records as whole lines; an interrupted call leaves the file untouched."""
    path = Path(path)
    existing = path.read_text() if path.exists() else ""
    if existing and not existing.endswith("\n"):
        existing += "\n"
    new = "".join(r.to_json() + "\n" for r in records)
    atomic_write_text(path, existing + new)


def load_records(path: str | os.PathLike, spot_check: int = 2) -> list[RunRecord]:
    """Read a record store, verifying every fingerprint and re-evaluating the
    best parameters of the first ``spot_check`` successful records."""
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = RunRecord.from_json(line)
            except (json.JSONDecodeError, RecordError) as exc:
                raise RecordError(f"{path}:{lineno}: {exc}") from None
            if fingerprint(rec.inputs) != rec.fingerprint:
                raise RecordError(f"{path}:{lineno}: fingerprint does not match stored inputs")
            records.append(rec)
    checked = 0
    for rec in records:
        if checked >= spot_check:
            break
        if not rec.ok:
            continue
        value = grk_infidelity(np.array(rec.best_params), rec.problem())
        if abs(value - rec.best_value) > SPOT_CHECK_TOL:
            raise RecordError(f"record seed={rec.seed}: stored best_value {rec.best_value!r} "
                              f"but re-evaluation gives {value!r}")
        checked += 1
    return records


# controls file -----------------------------------------------------------

_HEADER_KEYS = ("T", "K", "u_max", "n_max")


def write_controls(path: str | os.PathLike, schedule: ControlSchedule) -> None:
    lines = ["# gkslgate controls v1: header then K lines of 'u n1 n2'",
             f"T {fmt(schedule.T)}", f"K {schedule.K}",
             f"u_max {fmt(schedule.u_max)}", f"n_max {fmt(schedule.n_max)}"]
    lines += [f"{fmt(u)} {fmt(a)} {fmt(b)}"
              for u, a, b in zip(schedule.u, schedule.n1, schedule.n2)]
    atomic_write_text(path, "\n".join(lines) + "\n")


def _number(token: str, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ControlsFileError(f"{what}: {token!r} is not a number") from None
    if not math.isfinite(value):
        raise ControlsFileError(f"{what}: value must be finite")
    return value


def parse_controls(text: str) -> ControlSchedule:
    """Parse the controls format; errors name the offending field or line."""
    header: dict[str, float] = {}
    rows: list[tuple[float, float, float]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(header) < len(_HEADER_KEYS):
            key = _HEADER_KEYS[len(header)]
            if len(parts) != 2 or parts[0] != key:
                raise ControlsFileError(f"line {lineno}: expected header field '{key} <value>'")
            header[key] = _number(parts[1], f"header field {key}")
            continue
        if len(parts) != 3:
            raise ControlsFileError(
                f"line {lineno}: control row needs 3 values 'u n1 n2', got {len(parts)}")
        rows.append(tuple(_number(tok, f"line {lineno} field {name}")
                          for tok, name in zip(parts, ("u", "n1", "n2"))))
    if len(header) < len(_HEADER_KEYS):
        missing = _HEADER_KEYS[len(header)]
        raise ControlsFileError(f"missing header field {missing}")
    if header["T"] <= 0:
        raise ControlsFileError("header field T must be positive")
    K = header["K"]
    if K != int(K) or K < 1:
        raise ControlsFileError("header field K must be a positive integer")
    if len(rows) != int(K):
        raise ControlsFileError(f"header field K={int(K)} but found {len(rows)} control rows")
    arr = np.array(rows, dtype=float)
    try:
        return ControlSchedule(header["T"], arr[:, 0], arr[:, 1], arr[:, 2],
                               header["u_max"], header["n_max"])
    except ScheduleError as exc:
        raise ControlsFileError(str(exc)) from None


def read_controls(path: str | os.PathLike) -> ControlSchedule:
    return parse_controls(Path(path).read_text())


# figure tables -----------------------------------------------------------

STATS_COLUMNS = ("eps", "min_min", "max_min", "mean_min")
TRIALS_COLUMNS = ("eps", "trial_index", "best_value")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def trials_table(records) -> list[tuple]:
    rows = [(r.eps, r.trial_index, r.best_value) for r in records if r.ok]
    rows.sort(key=lambda t: (t[0], t[1]))
    return rows


def stats_table(records) -> list[tuple]:
    by_eps: dict[float, list[float]] = {}
    for r in records:
        if r.ok:
            by_eps.setdefault(r.eps, []).append(r.best_value)
    return [(eps, *stats(values)) for eps, values in sorted(by_eps.items())]


def stats_csv(records) -> str:
    return _csv_text(STATS_COLUMNS, [[fmt(v) for v in row] for row in stats_table(records)])


def trials_csv(records) -> str:
    return _csv_text(TRIALS_COLUMNS,
                     [[fmt(e), str(i), fmt(v)] for e, i, v in trials_table(records)])


SUMMARY_COLUMNS = ("eps", "min_min", "max_min", "mean_min", "n_ok", "n_failed",
                   "u_min", "u_max", "n1_min", "n1_max", "n2_min", "n2_max")


def summary_csv(rows) -> str:
    """Per-coupling summary of a sweep, with control extrema over all trials."""
    out = []
    for row in rows:
        ranges = [r for r in row.ranges if r is not None]
        if ranges:
            arr = np.array(ranges)
            extrema = [arr[:, 0].min(), arr[:, 1].max(), arr[:, 2].min(), arr[:, 3].max(),
                       arr[:, 4].min(), arr[:, 5].max()]
        else:
            extrema = [math.nan] * 6
        n_ok = len(row.results) - row.n_failed
        out.append([fmt(row.eps), fmt(row.min_min), fmt(row.max_min), fmt(row.mean_min),
                    str(n_ok), str(row.n_failed)] + [fmt(v) for v in extrema])
    return _csv_text(SUMMARY_COLUMNS, out)
