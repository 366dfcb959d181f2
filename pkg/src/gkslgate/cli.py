"""Command-line interface: ``simulate``, ``optimize``, ``sweep`` and ``report``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .annealing import AnnealConfig, dual_anneal, local_search_budget
from .dynamics import SystemSpec, parts_for, rk4_reference
from .experiments import EPS_SERIES, SweepPlan, default_workers, sweep
from .objective import GateProblem, ScheduleTemplate, bounds, encode, final_states, grk_infidelity
from .quantum import Gate, grk_initial_states, hs_dist_sq, to_real16
from .records import (ControlsFileError, RecordError, RunRecord, append_records,
                      atomic_write_text, load_records, read_controls, stats_csv, summary_csv,
                      trials_csv)
from .schedule import ControlSchedule, ScheduleError

log = logging.getLogger("gkslgate")


class CliError(Exception):
    """Invalid user input; reported on stderr with exit status 2."""


def _positive(kind):
    def parse(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{text!r} is not a valid {kind.__name__}") from None
        if not value > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value
    return parse


def _nonneg_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _eps_list(text):
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}") from None
    if not values or any(not v >= 0 for v in values):
        raise argparse.ArgumentTypeError("eps list must be non-empty and nonnegative")
    return values


def _add_problem_args(p, with_eps=True):
    p.add_argument("--system", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--gate", type=Gate.parse, required=True, help="cnot, swap or cz")
    if with_eps:
        p.add_argument("--eps", type=_nonneg_float, required=True)


def _add_tuning_args(p):
    d = AnnealConfig()
    t = ScheduleTemplate()
    p.add_argument("--maxfun", type=_positive(int), default=d.maxfun)
    p.add_argument("--maxiter", type=_positive(int), default=d.maxiter)
    p.add_argument("--initial-temp", type=_positive(float), default=d.initial_temp)
    p.add_argument("--k", type=_positive(int), default=t.K, help="number of control segments")
    p.add_argument("--t", type=_positive(float), default=t.T, help="final time T")
    p.add_argument("--umax", type=_positive(float), default=t.u_max)
    p.add_argument("--nmax", type=_positive(float), default=t.n_max)
    p.add_argument("--no-local-search", action="store_true")


def _config(args, seed=0) -> tuple[AnnealConfig, ScheduleTemplate]:
    cfg = AnnealConfig(initial_temp=args.initial_temp, maxiter=args.maxiter, maxfun=args.maxfun,
                       local_search=not args.no_local_search, seed=seed)
    template = ScheduleTemplate(T=args.t, K=args.k, u_max=args.umax, n_max=args.nmax)
    return cfg, template


def _echo_settings(cfg: AnnealConfig, template: ScheduleTemplate) -> str:
    return (f"initial_temp={cfg.initial_temp:g} maxfun={cfg.maxfun} maxiter={cfg.maxiter} "
            f"K={template.K} T={template.T:g} u_max={template.u_max:g} "
            f"n_max={template.n_max:g}")


def _matrix_json(rho):
    return [[[float(z.real), float(z.imag)] for z in row] for row in rho]


def cmd_simulate(args) -> int:
    try:
        schedule = read_controls(args.controls)
    except OSError as exc:
        raise CliError(f"cannot read controls file: {exc}") from None
    except ControlsFileError as exc:
        raise CliError(f"controls file {args.controls}: {exc}") from None
    if args.t is not None:
        schedule = ControlSchedule(args.t, schedule.u, schedule.n1, schedule.n2,
                                   schedule.u_max, schedule.n_max)
    template = ScheduleTemplate(schedule.T, schedule.K, schedule.u_max, schedule.n_max)
    problem = GateProblem(SystemSpec.standard(args.system, args.eps), args.gate, template)
    p = encode(schedule)
    finals = final_states(p, problem)
    value = grk_infidelity(p, problem)
    out = {"gate": problem.gate.value, "system": args.system, "eps": args.eps,
           "T": schedule.T, "K": schedule.K, "objective": value, "states": []}
    for m, rho in enumerate(finals, 1):
        out["states"].append({"initial_state": m, "matrix": _matrix_json(rho),
                              "real16": [float(x) for x in to_real16(rho)]})
    print(f"objective F = {value:.17g}")
    if args.oracle_check:
        parts = parts_for(problem.spec)
        gap = max(np.sqrt(hs_dist_sq(rk4_reference(r0, schedule, parts, args.substeps), rho))
                  for r0, rho in zip(grk_initial_states(), finals))
        out["oracle_discrepancy"] = float(gap)
        print(f"rk4 oracle discrepancy (max HS norm) = {gap:.3e}")
    atomic_write_text(args.out, json.dumps(out, indent=1) + "\n")
    print(f"final states written to {args.out}")
    return 0


def cmd_optimize(args) -> int:
    cfg, template = _config(args, seed=args.seed)
    problem = GateProblem(SystemSpec.standard(args.system, args.eps), args.gate, template)
    print(_echo_settings(cfg, template))
    result = dual_anneal(problem, bounds(problem), cfg)
    if not result.ok:
        print(f"trial failed: {result.error}", file=sys.stderr)
    record = RunRecord.from_trial(problem, cfg, result)
    append_records(args.out, [record])
    print(f"best_value = {result.best_value:.17g}  n_evals = {result.n_evals}  "
          f"wall_time = {result.wall_time:.1f}s")
    return 0 if result.ok else 1


def estimate_seconds(plan: SweepPlan, workers: int, samples: int = 5) -> tuple[float, float]:
    """(seconds per objective evaluation, estimated wall time of the whole plan)."""
    problem = plan.problem(max(plan.eps_values))
    lower, upper = bounds(problem)
    rng = np.random.default_rng(0)
    grk_infidelity(lower + rng.random(len(lower)) * (upper - lower), problem)
    start = time.perf_counter()
    for _ in range(samples):
        grk_infidelity(lower + rng.random(len(lower)) * (upper - lower), problem)
    per_eval = (time.perf_counter() - start) / samples
    evals = plan.anneal.maxfun + (local_search_budget(problem.template.dim)
                                  if plan.anneal.local_search else 0)
    return per_eval, per_eval * evals * plan.n_trials / max(1, workers)


def cmd_sweep(args) -> int:
    cfg, template = _config(args)
    workers = args.workers if args.workers is not None else default_workers()
    plan = SweepPlan(SystemSpec.standard(args.system), args.gate, args.eps_list, args.trials,
                     args.base_seed, cfg, template)
    print(_echo_settings(cfg, template))
    per_eval, total = estimate_seconds(plan, workers)
    print(f"plan: {len(plan.eps_values)} eps values x {plan.trials_per_eps} trials = "
          f"{plan.n_trials} trials, {workers} worker(s)")
    print(f"estimated runtime: {total:.0f} s ({total / 3600:.2f} h) "
          f"at {per_eval * 1e3:.2f} ms per objective evaluation")
    if args.dry_run:
        return 0

    def persist(row):
        problem = plan.problem(row.eps)
        recs = []
        for i, result in enumerate(row.results):
            trial_cfg = AnnealConfig(**{**cfg.as_dict(), "seed": result.seed})
            recs.append(RunRecord.from_trial(problem, trial_cfg, result, trial_index=i,
                                             eps_index=row.eps_index, base_seed=plan.base_seed))
        append_records(args.out, recs)
        print(f"eps={row.eps:g}: min-min={row.min_min:.6g} max-min={row.max_min:.6g} "
              f"mean-min={row.mean_min:.6g} failed={row.n_failed}", flush=True)

    summary = sweep(plan, workers=workers, on_row=persist)
    summary_path = Path(str(args.out) + ".summary.csv")
    atomic_write_text(summary_path, summary_csv(summary.rows))
    print(f"records appended to {args.out}; summary table in {summary_path}")
    return 0


def cmd_report(args) -> int:
    try:
        records = load_records(args.input, spot_check=args.spot_check)
    except OSError as exc:
        raise CliError(f"cannot read {args.input}: {exc}") from None
    except RecordError as exc:
        raise CliError(str(exc)) from None
    if args.gate is not None:
        records = [r for r in records if r.gate == args.gate.value]
    if args.system is not None:
        records = [r for r in records if r.system == args.system]
    combos = {(r.gate, r.system) for r in records}
    if len(combos) > 1:
        raise CliError("store mixes several gate/system pairs "
                       f"{sorted(combos)}; select one with --gate and --system")
    if not any(r.ok for r in records):
        raise CliError("no successful trial records to report")
    text = stats_csv(records) if args.figure == "stats" else trials_csv(records)
    atomic_write_text(args.out, text)
    print(f"wrote {args.figure} table to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gkslgate",
        description="Two-qubit gate generation for open systems with coherent and "
                    "incoherent controls.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="propagate the three GRK states under given controls")
    _add_problem_args(p)
    p.add_argument("--controls", required=True, help="controls file")
    p.add_argument("--t", type=_positive(float), default=None,
                   help="override the horizon T from the controls file")
    p.add_argument("--oracle-check", action="store_true",
                   help="compare against a fixed-step RK4 integration")
    p.add_argument("--substeps", type=_positive(int), default=10_000,
                   help="RK4 steps per control segment for --oracle-check")
    p.add_argument("--out", default="final_states.json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", help="one dual-annealing trial")
    _add_problem_args(p)
    p.add_argument("--seed", type=int, default=0)
    _add_tuning_args(p)
    p.add_argument("--out", default="runs.jsonl")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="trials over a series of eps values")
    _add_problem_args(p, with_eps=False)
    p.add_argument("--eps-list", type=_eps_list, default=EPS_SERIES,
                   help="comma-separated eps values (default 0,0.01,...,0.1)")
    p.add_argument("--trials", type=_positive(int), default=10)
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--workers", type=_positive(int), default=None,
                   help="parallel trials (default: $GKSLGATE_WORKERS or 1)")
    _add_tuning_args(p)
    p.add_argument("--dry-run", action="store_true", help="print the cost estimate and stop")
    p.add_argument("--out", default="sweep.jsonl")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="figure-ready CSV from a record store")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--figure", choices=("stats", "trials"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gate", type=Gate.parse, default=None)
    p.add_argument("--system", type=int, choices=(1, 2, 3), default=None)
    p.add_argument("--spot-check", type=int, default=2,
                   help="records whose best value is re-evaluated on load")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, ScheduleError, ValueError) as exc:
        print(f"gkslgate {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
