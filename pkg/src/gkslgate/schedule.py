"""Piecewise-constant control schedules on a uniform grid over [0, T]."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_T = 20.0
DEFAULT_K = 200
DEFAULT_U_MAX = 20.0
DEFAULT_N_MAX = 20.0


class ScheduleError(ValueError):
    """Malformed schedule: wrong lengths, bad horizon or out-of-box values."""


def _frozen(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ScheduleError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ControlSchedule:
    """Values of ``u``, ``n1``, ``n2`` on K equal segments ``[t_i, t_{i+1})``.

    The value on the last segment is also the value at ``t = T``.
    """

    T: float
    u: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    u_max: float = DEFAULT_U_MAX
    n_max: float = DEFAULT_N_MAX

    def __post_init__(self):
        object.__setattr__(self, "u", _frozen(self.u, "u"))
        object.__setattr__(self, "n1", _frozen(self.n1, "n1"))
        object.__setattr__(self, "n2", _frozen(self.n2, "n2"))
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "u_max", float(self.u_max))
        object.__setattr__(self, "n_max", float(self.n_max))
        self.validate()

    @property
    def K(self) -> int:
        return len(self.u)

    @property
    def dt(self) -> float:
        return self.T / self.K

    def validate(self) -> None:
        if not (np.isfinite(self.T) and self.T >= 0):
            raise ScheduleError(f"horizon T must be finite and >= 0, got {self.T}")
        if self.K < 1:
            raise ScheduleError("schedule needs at least one segment (K >= 1)")
        if not (len(self.n1) == len(self.n2) == self.K):
            raise ScheduleError(
                f"u, n1, n2 lengths differ: {self.K}, {len(self.n1)}, {len(self.n2)}")
        if not (self.u_max > 0 and self.n_max > 0):
            raise ScheduleError("u_max and n_max must be positive")
        if np.any(np.abs(self.u) > self.u_max):
            raise ScheduleError(f"u outside [-{self.u_max}, {self.u_max}]")
        for name, arr in (("n1", self.n1), ("n2", self.n2)):
            if np.any(arr < 0) or np.any(arr > self.n_max):
                raise ScheduleError(f"{name} outside [0, {self.n_max}]")

    @classmethod
    def constant(cls, K: int, u: float = 0.0, n1: float = 0.0, n2: float = 0.0,
                 T: float = DEFAULT_T, u_max: float = DEFAULT_U_MAX,
                 n_max: float = DEFAULT_N_MAX) -> "ControlSchedule":
        return cls(T, np.full(K, u), np.full(K, n1), np.full(K, n2), u_max, n_max)

    @classmethod
    def random(cls, rng: np.random.Generator, K: int, T: float = DEFAULT_T,
               u_max: float = DEFAULT_U_MAX, n_max: float = DEFAULT_N_MAX) -> "ControlSchedule":
        return cls(T, rng.uniform(-u_max, u_max, K), rng.uniform(0, n_max, K),
                   rng.uniform(0, n_max, K), u_max, n_max)

    def value_at(self, t: float) -> tuple[float, float, float]:
        """Control values at time ``t``; ``t = T`` continues the last segment."""
        if t < 0 or t > self.T:
            raise ValueError(f"t={t} outside [0, {self.T}]")
        i = min(int(t // self.dt), self.K - 1) if self.T > 0 else 0
        return float(self.u[i]), float(self.n1[i]), float(self.n2[i])

    def __eq__(self, other):
        if not isinstance(other, ControlSchedule):
            return NotImplemented
        return (self.T == other.T and self.u_max == other.u_max and self.n_max == other.n_max
                and np.array_equal(self.u, other.u) and np.array_equal(self.n1, other.n1)
                and np.array_equal(self.n2, other.n2))

    __hash__ = None
