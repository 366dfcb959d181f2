"""Seeded multi-trial runs over a series of environment couplings and the
min/max/mean statistics of each trial's best infidelity."""
from __future__ import annotations

import hashlib
import math
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .annealing import AnnealConfig, TrialResult, dual_anneal
from .dynamics import SystemSpec
from .objective import GateProblem, ScheduleTemplate, bounds, decode
from .quantum import Gate

EPS_SERIES = tuple(round(0.01 * i, 2) for i in range(11))
WORKERS_ENV = "GKSLGATE_WORKERS"

_GATE_IDS = {Gate.CNOT: 1, Gate.SWAP: 2, Gate.CZ: 3}


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def derive_seed(base_seed: int, gate: Gate, system: int, eps_index: int, trial: int) -> int:
    """64-bit seed from BLAKE2b over the little-endian packed tuple
    ``(base_seed, gate id, system id, eps index, trial index)``."""
    payload = struct.pack("<5Q", base_seed % 2**64, _GATE_IDS[Gate(gate)], int(system),
                          eps_index, trial)
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def _run_one(problem: GateProblem, cfg: AnnealConfig) -> TrialResult:
    try:
        return dual_anneal(problem, bounds(problem), cfg)
    except Exception as exc:  # a failed trial is reported, never dropped
        dim = problem.template.dim
        return TrialResult(np.full(dim, np.nan), math.nan, 0, 0, cfg.seed, 0.0,
                           error=f"{type(exc).__name__}: {exc}")


def _execute(jobs: list[tuple[GateProblem, AnnealConfig]], workers: int):
    """Yield trial results in job order, running up to ``workers`` at once."""
    if workers <= 1 or len(jobs) <= 1:
        for p, c in jobs:
            yield _run_one(p, c)
        return
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        futures = [pool.submit(_run_one, p, c) for p, c in jobs]
        for fut in futures:
            yield fut.result()


def trial_configs(problem: GateProblem, cfg: AnnealConfig, n: int, base_seed: int,
                  eps_index: int = 0) -> list[AnnealConfig]:
    if n < 1:
        raise ValueError("need at least one trial")
    return [replace(cfg, seed=derive_seed(base_seed, problem.gate, problem.spec.variant,
                                          eps_index, i))
            for i in range(n)]


def run_trials(problem: GateProblem, cfg: AnnealConfig, n: int, base_seed: int,
               eps_index: int = 0, workers: int = 1) -> list[TrialResult]:
    """Run ``n`` independently seeded annealing trials; output is in trial order."""
    cfgs = trial_configs(problem, cfg, n, base_seed, eps_index)
    return list(_execute([(problem, c) for c in cfgs], workers))


def stats(results) -> tuple[float, float, float]:
    """(min-min, max-min, mean-min) of the best values of the successful trials."""
    values = [r.best_value if isinstance(r, TrialResult) else float(r) for r in results
              if not isinstance(r, TrialResult) or r.ok]
    if not values:
        raise ValueError("statistics need at least one successful trial")
    return min(values), max(values), math.fsum(values) / len(values)


def control_ranges(result: TrialResult, template: ScheduleTemplate) -> tuple[float, ...]:
    """(u_min, u_max, n1_min, n1_max, n2_min, n2_max) of the decoded best controls."""
    s = decode(result.best_params, template)
    return (float(s.u.min()), float(s.u.max()), float(s.n1.min()), float(s.n1.max()),
            float(s.n2.min()), float(s.n2.max()))


@dataclass(frozen=True)
class SweepPlan:
    system: SystemSpec
    gate: Gate
    eps_values: tuple[float, ...] = EPS_SERIES
    trials_per_eps: int = 10
    base_seed: int = 0
    anneal: AnnealConfig = AnnealConfig()
    template: ScheduleTemplate = ScheduleTemplate()

    def __post_init__(self):
        object.__setattr__(self, "gate", Gate.parse(self.gate) if not isinstance(self.gate, Gate)
                           else self.gate)
        object.__setattr__(self, "eps_values", tuple(float(e) for e in self.eps_values))
        if not self.eps_values:
            raise ValueError("eps_values must not be empty")
        if any(not e >= 0 for e in self.eps_values):
            raise ValueError("eps values must be >= 0")
        if self.trials_per_eps < 1:
            raise ValueError("trials_per_eps must be >= 1")

    def problem(self, eps: float) -> GateProblem:
        return GateProblem(self.system.with_eps(eps), self.gate, self.template)

    @property
    def n_trials(self) -> int:
        return len(self.eps_values) * self.trials_per_eps


@dataclass
class EpsRow:
    eps: float
    eps_index: int
    min_min: float
    max_min: float
    mean_min: float
    values: list[float]
    ranges: list[tuple[float, ...] | None]
    results: list[TrialResult] = field(repr=False)

    @property
    def n_failed(self) -> int:
        return sum(not r.ok for r in self.results)


@dataclass
class SweepSummary:
    plan: SweepPlan
    rows: list[EpsRow]


def summarize(eps: float, eps_index: int, results: list[TrialResult],
              template: ScheduleTemplate) -> EpsRow:
    try:
        lo, hi, mean = stats(results)
    except ValueError:
        lo = hi = mean = math.nan
    return EpsRow(
        eps=eps, eps_index=eps_index, min_min=lo, max_min=hi, mean_min=mean,
        values=[r.best_value for r in results],
        ranges=[control_ranges(r, template) if r.ok else None for r in results],
        results=results,
    )


def sweep(plan: SweepPlan, workers: int = 1, on_row=None) -> SweepSummary:
    """Run every trial of every coupling; trials are the unit of parallelism.

    ``on_row`` is called with each finished :class:`EpsRow`, in plan order.
    """
    jobs = []
    for e_idx, eps in enumerate(plan.eps_values):
        problem = plan.problem(eps)
        jobs.extend((problem, cfg) for cfg in
                    trial_configs(problem, plan.anneal, plan.trials_per_eps, plan.base_seed, e_idx))
    results = _execute(jobs, workers)
    rows = []
    for e_idx, eps in enumerate(plan.eps_values):
        mine = [next(results) for _ in range(plan.trials_per_eps)]
        row = summarize(eps, e_idx, mine, plan.template)
        rows.append(row)
        if on_row is not None:
            on_row(row)
    return SweepSummary(plan, rows)
