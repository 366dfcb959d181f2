"""Parameter encoding of piecewise-constant controls and the three-state
squared-distance gate infidelity.

A parameter vector has length 3K and is ordered
``[u^1..u^K, n1^1..n1^K, n2^1..n2^K]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .dynamics import (LiouvillianParts, SystemSpec, build_system, liouvillian_parts,
                       propagate_real)
from .quantum import Gate, from_real16, gate_targets, grk_initial_states, hs_dist_sq, to_real16
from .schedule import (DEFAULT_K, DEFAULT_N_MAX, DEFAULT_T, DEFAULT_U_MAX, ControlSchedule,
                       ScheduleError)

BOUNDARY_SNAP = 1e-12


@dataclass(frozen=True)
class ScheduleTemplate:
    """Horizon, segment count and box bounds shared by all schedules of a problem."""

    T: float = DEFAULT_T
    K: int = DEFAULT_K
    u_max: float = DEFAULT_U_MAX
    n_max: float = DEFAULT_N_MAX

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise ScheduleError(f"horizon T must be positive, got {self.T}")
        if int(self.K) != self.K or self.K < 1:
            raise ScheduleError(f"K must be a positive integer, got {self.K}")
        if not (self.u_max > 0 and self.n_max > 0):
            raise ScheduleError("u_max and n_max must be positive")

    @property
    def dim(self) -> int:
        return 3 * self.K


@dataclass(frozen=True)
class GateProblem:
    spec: SystemSpec
    gate: Gate
    template: ScheduleTemplate = field(default_factory=ScheduleTemplate)

    def __post_init__(self):
        if not isinstance(self.gate, Gate):
            object.__setattr__(self, "gate", Gate.parse(self.gate))

    @cached_property
    def parts(self) -> LiouvillianParts:
        return liouvillian_parts(build_system(self.spec), self.spec)

    @cached_property
    def real_parts(self) -> LiouvillianParts:
        return self.parts.realified()

    @cached_property
    def targets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return gate_targets(self.gate)

    def __call__(self, p: np.ndarray) -> float:
        return grk_infidelity(p, self)

    # cached_property needs an instance __dict__; keep pickling to the declared fields
    def __getstate__(self):
        return {"spec": self.spec, "gate": self.gate, "template": self.template}

    def __setstate__(self, state):
        for key, value in state.items():
            object.__setattr__(self, key, value)


_INITIAL_X = np.stack([to_real16(r) for r in grk_initial_states()], axis=1)


def encode(schedule: ControlSchedule) -> np.ndarray:
    schedule.validate()
    return np.concatenate([schedule.u, schedule.n1, schedule.n2])


def decode(p: np.ndarray, template: ScheduleTemplate | GateProblem) -> ControlSchedule:
    if isinstance(template, GateProblem):
        template = template.template
    p = np.asarray(p, dtype=float)
    if p.shape != (template.dim,):
        raise ScheduleError(f"parameter vector must have length {template.dim}, got {p.shape}")
    K = template.K
    return ControlSchedule(template.T, p[:K], p[K:2 * K], p[2 * K:], template.u_max,
                           template.n_max)


def bounds(problem: GateProblem | ScheduleTemplate) -> tuple[np.ndarray, np.ndarray]:
    t = problem.template if isinstance(problem, GateProblem) else problem
    lower = np.concatenate([np.full(t.K, -t.u_max), np.zeros(2 * t.K)])
    upper = np.concatenate([np.full(t.K, t.u_max), np.full(2 * t.K, t.n_max)])
    return lower, upper


def snap_to_box(p: np.ndarray, lower: np.ndarray, upper: np.ndarray,
                tol: float = BOUNDARY_SNAP) -> np.ndarray:
    """Move coordinates lying within ``tol`` outside the box onto its faces."""
    p = np.array(p, dtype=float)
    low = (p < lower) & (p >= lower - tol)
    high = (p > upper) & (p <= upper + tol)
    p[low] = lower[low]
    p[high] = upper[high]
    return p


def infidelity_from_finals(finals, targets) -> float:
    """(1/6) * sum of squared Hilbert-Schmidt distances between finals and targets."""
    finals, targets = list(finals), list(targets)
    if len(finals) != len(targets):
        raise ValueError("finals and targets differ in length")
    return sum(hs_dist_sq(f, t) for f, t in zip(finals, targets)) / 6.0


def final_states(p: np.ndarray, problem: GateProblem) -> list[np.ndarray]:
    """Final density matrices of the three GRK initial states under controls ``p``."""
    lower, upper = bounds(problem)
    schedule = decode(snap_to_box(p, lower, upper), problem)
    xs = propagate_real(_INITIAL_X, schedule, problem.real_parts)
    return [from_real16(xs[:, m]) for m in range(xs.shape[1])]


def grk_infidelity(p: np.ndarray, problem: GateProblem) -> float:
    return infidelity_from_finals(final_states(p, problem), problem.targets)
