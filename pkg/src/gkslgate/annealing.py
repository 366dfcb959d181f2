"""Dual annealing: generalized simulated annealing (Tsallis visiting
distribution, generalized Metropolis acceptance, restarts) combined with a
bound-constrained local search.

Randomness comes from numpy's ``PCG64`` bit generator seeded with a 64-bit
integer, so a trial is reproducible on every platform numpy supports.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Objective = Callable[[np.ndarray], float]

VISIT_CAP = 1e8


@dataclass(frozen=True)
class AnnealConfig:
    initial_temp: float = 3e4
    visit: float = 2.62
    accept: float = -5.0
    maxiter: int = 3000
    maxfun: int = 30000
    restart_temp_ratio: float = 2e-5
    local_search: bool = True
    seed: int = 0
    visit_cap: float = VISIT_CAP

    def __post_init__(self):
        if not self.initial_temp > 0:
            raise ValueError("initial_temp must be > 0")
        if not 1 < self.visit <= 3:
            raise ValueError("visit parameter must lie in (1, 3]")
        if self.maxiter < 1 or self.maxfun < 1:
            raise ValueError("maxiter and maxfun must be >= 1")
        if not 0 < self.restart_temp_ratio < 1:
            raise ValueError("restart_temp_ratio must lie in (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def as_dict(self) -> dict:
        return {"initial_temp": self.initial_temp, "visit": self.visit, "accept": self.accept,
                "maxiter": self.maxiter, "maxfun": self.maxfun,
                "restart_temp_ratio": self.restart_temp_ratio,
                "local_search": self.local_search, "seed": self.seed,
                "visit_cap": self.visit_cap}


@dataclass
class TrialResult:
    best_params: np.ndarray
    best_value: float
    n_evals: int
    n_iters: int
    seed: int
    wall_time: float
    history: list[tuple[int, float]] = field(default_factory=list)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and math.isfinite(self.best_value)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def visiting_temperature(k: int, cfg: AnnealConfig) -> float:
    """``T0 (2^(q-1) - 1) / ((1+k)^(q-1) - 1)`` for iteration ``k >= 1``."""
    if k < 1:
        raise ValueError("iteration index starts at 1")
    q1 = cfg.visit - 1.0
    return cfg.initial_temp * math.expm1(q1 * math.log(2.0)) / math.expm1(q1 * math.log1p(k))


def acceptance_temperature(k: int, t_visit: float) -> float:
    return t_visit / k


def visit_sample(rng: np.random.Generator, t_v: float, q_v: float, dim: int,
                 cap: float = VISIT_CAP) -> np.ndarray:
    """Draw ``dim`` displacements from the Tsallis visiting distribution.

    A Gaussian with temperature-dependent width is divided by a power of the
    magnitude of a second, independent Gaussian.
    """
    q1 = q_v - 1.0
    factor1 = math.exp(math.log(t_v) / q1)
    factor2 = math.exp((4.0 - q_v) * math.log(q1))
    factor3 = math.exp((2.0 - q_v) * math.log(2.0) / q1)
    factor4 = math.sqrt(math.pi) * factor1 * factor2 / (factor3 * (3.0 - q_v))
    factor5 = 1.0 / q1 - 0.5
    d1 = 2.0 - factor5
    factor6 = (math.pi * (1.0 - factor5) / math.sin(math.pi * (1.0 - factor5))
               / math.exp(math.lgamma(d1)))
    sigma = math.exp(-q1 * math.log(factor6 / factor4) / (3.0 - q_v))
    x = sigma * rng.standard_normal(dim)
    y = rng.standard_normal(dim)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        den = np.exp(q1 * np.log(np.abs(y)) / (3.0 - q_v))
        step = x / den
    step = np.where(np.isnan(step), 0.0, step)
    return np.clip(step, -cap, cap)


def acceptance_probability(delta: float, t_accept: float, q_a: float) -> float:
    if delta <= 0:
        return 1.0
    bracket = 1.0 - (1.0 - q_a) * delta / t_accept
    if bracket <= 0:
        return 0.0
    return math.exp(math.log(bracket) / (1.0 - q_a))


def accept(rng: np.random.Generator, delta: float, t_accept: float, q_a: float) -> bool:
    """Generalized Metropolis test; downhill or level moves always pass."""
    if delta <= 0:
        return True
    return bool(rng.random() <= acceptance_probability(delta, t_accept, q_a))


def wrap_into_box(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Fold coordinates into ``[lower, upper)`` modulo the box span."""
    span = upper - lower
    out = np.where((x >= lower) & (x < upper), x, lower + np.mod(x - lower, span))
    # mod can round up to exactly span
    return np.where(out >= upper, lower, np.where(out < lower, lower, out))


class _BudgetExhausted(Exception):
    pass


class _Counter:
    """Objective wrapper: counts calls, enforces the budget, maps failures to +inf."""

    def __init__(self, f: Objective, lower, upper, limit: int, on_eval=None):
        self.f = f
        self.lower, self.upper = lower, upper
        self.limit = limit
        self.n = 0
        self.on_eval = on_eval

    @property
    def remaining(self) -> int:
        return self.limit - self.n

    def __call__(self, x: np.ndarray) -> float:
        if self.n >= self.limit:
            raise _BudgetExhausted
        if np.any(x < self.lower) or np.any(x > self.upper):
            raise AssertionError("candidate outside the search box")
        self.n += 1
        try:
            value = float(self.f(x))
        except (ArithmeticError, ValueError, np.linalg.LinAlgError):
            value = math.inf
        if math.isnan(value):
            value = math.inf
        if self.on_eval is not None:
            self.on_eval(x, value)
        return value


def _fd_gradient(fc, x, fx, lower, upper):
    g = np.empty_like(x)
    for i in range(len(x)):
        h = 1.4901161193847656e-08 * max(1.0, abs(x[i]))
        xi = x.copy()
        if x[i] + h <= upper[i]:
            xi[i] = x[i] + h
        else:
            h = -h
            xi[i] = x[i] + h
        fi = fc(xi)
        g[i] = (fi - fx) / h if math.isfinite(fi) else 0.0
    return g


def _lbfgs_direction(g, s_hist, y_hist):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        alphas.append((a, rho, s, y))
        q -= a * y
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= (s @ y) / (y @ y)
    for a, rho, s, y in reversed(alphas):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def local_search(f: Objective, x0: np.ndarray, lower: np.ndarray, upper: np.ndarray,
                 budget: int, f0: float | None = None, memory: int = 10,
                 gtol: float = 1e-10, ftol: float = 1e-15,
                 max_iter: int = 1000, expand: bool = True) -> tuple[np.ndarray, float, int]:
    """Projected limited-memory quasi-Newton descent with finite-difference gradients.

    Coordinates sitting on a face with the gradient pointing outward are
    frozen; every step is projected back onto the box.  Returns the best
    point seen, its value and the number of objective evaluations used.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    best = {"x": np.clip(np.asarray(x0, dtype=float), lower, upper), "f": math.inf}

    def track(x, value):
        if value < best["f"]:
            best["x"], best["f"] = x.copy(), value

    fc = _Counter(f, lower, upper, max(int(budget), 0), on_eval=track)
    x = best["x"].copy()
    if f0 is not None:
        best["f"] = float(f0)
    try:
        fx = fc(x) if f0 is None else float(f0)
        if not math.isfinite(fx):
            return best["x"], best["f"], fc.n
        g = _fd_gradient(fc, x, fx, lower, upper)
        s_hist: list[np.ndarray] = []
        y_hist: list[np.ndarray] = []
        stalled = 0
        iters = 0
        while iters < max_iter:
            frozen = ((x <= lower) & (g > 0)) | ((x >= upper) & (g < 0))
            pg = np.where(frozen, 0.0, g)
            if np.max(np.abs(pg), initial=0.0) <= gtol:
                break
            d = _lbfgs_direction(pg, s_hist, y_hist)
            d[frozen] = 0.0
            if d @ pg >= 0:
                s_hist.clear()
                y_hist.clear()
                d = -pg
            step = min(1.0, 1.0 / np.linalg.norm(pg)) if not s_hist else 1.0
            first_trial = True
            for _ in range(40):
                x_new = np.clip(x + step * d, lower, upper)
                f_new = fc(x_new)
                if f_new <= fx + 1e-4 * (pg @ (x_new - x)) and f_new <= fx:
                    break
                step *= 0.5
                first_trial = False
            else:
                if s_hist:
                    s_hist.clear()
                    y_hist.clear()
                    continue
                break
            if first_trial and expand:
                # the initial step was accepted outright: expand while the projected
                # step keeps improving (cheap next to a finite-difference gradient)
                for _ in range(30):
                    x_try = np.clip(x + 2.0 * step * d, lower, upper)
                    if np.array_equal(x_try, x_new):
                        break
                    f_try = fc(x_try)
                    if not f_try < f_new:
                        break
                    step, x_new, f_new = 2.0 * step, x_try, f_try
            iters += 1
            g_new = _fd_gradient(fc, x_new, f_new, lower, upper)
            s, y = x_new - x, g_new - g
            if s @ y > 1e-12 * (np.linalg.norm(s) * np.linalg.norm(y) + 1e-300):
                s_hist.append(s)
                y_hist.append(y)
                if len(s_hist) > memory:
                    s_hist.pop(0)
                    y_hist.pop(0)
            decrease = fx - f_new
            x, fx, g = x_new, f_new, g_new
            stalled = stalled + 1 if decrease <= ftol * max(1.0, abs(fx)) else 0
            if stalled >= 2:
                break
    except _BudgetExhausted:
        pass
    return best["x"], best["f"], fc.n


def local_search_budget(dim: int) -> int:
    """Evaluation cap for the final polish: about ten gradient steps."""
    return max(100, 10 * (dim + 1))


def local_search_iterations(dim: int) -> int:
    return min(max(6 * dim, 100), 1000)


def dual_anneal(f: Objective, bounds, cfg: AnnealConfig = AnnealConfig(),
                record_history: bool = True) -> TrialResult:
    """Minimize ``f`` over the box ``bounds = (lower, upper)``.

    Each iteration runs a chain of ``2 * dim`` proposals: the first ``dim``
    move all coordinates at once, the rest move one coordinate each.  The
    local search runs after an iteration that improved the global best and
    once more at the end; its evaluations count against ``maxfun`` (the final
    polish may exceed it by at most one local-search budget).
    """
    start = time.perf_counter()
    lower = np.asarray(bounds[0], dtype=float)
    upper = np.asarray(bounds[1], dtype=float)
    if lower.shape != upper.shape or lower.ndim != 1:
        raise ValueError("bounds must be two 1-D arrays of equal length")
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper)) and np.all(lower < upper)):
        raise ValueError("bounds must be finite with lower < upper")
    dim = len(lower)
    rng = make_rng(cfg.seed)
    history: list[tuple[int, float]] = []
    state = {"x": None, "f": math.inf}

    def track(x, value):
        if value < state["f"]:
            state["x"], state["f"] = x.copy(), value
            if record_history:
                history.append((fc.n, value))

    fc = _Counter(f, lower, upper, cfg.maxfun, on_eval=track)
    ls_cap = local_search_budget(dim)
    ls_iters = local_search_iterations(dim)

    def run_local(x0, f0, budget):
        if budget <= 0:
            return x0, f0
        saved = fc.limit
        fc.limit = fc.n + budget
        try:
            x1, f1, _ = local_search(fc, x0, lower, upper, budget, f0=f0, max_iter=ls_iters)
        finally:
            fc.limit = saved
        return (x1, f1) if f1 < f0 else (x0, f0)

    n_iters = 0
    try:
        x = lower + rng.random(dim) * (upper - lower)
        x = wrap_into_box(x, lower, upper)
        fx = fc(x)
        k = 1
        for _ in range(cfg.maxiter):
            t_v = visiting_temperature(k, cfg)
            if t_v < cfg.restart_temp_ratio * cfg.initial_temp:
                x = wrap_into_box(lower + rng.random(dim) * (upper - lower), lower, upper)
                fx = fc(x)
                k = 1
                t_v = visiting_temperature(k, cfg)
            t_acc = acceptance_temperature(k, t_v)
            best_before = state["f"]
            for j in range(2 * dim):
                if j < dim:
                    cand = x + visit_sample(rng, t_v, cfg.visit, dim, cfg.visit_cap)
                else:
                    i = j - dim
                    cand = x.copy()
                    cand[i] += visit_sample(rng, t_v, cfg.visit, 1, cfg.visit_cap)[0]
                cand = wrap_into_box(cand, lower, upper)
                fcand = fc(cand)
                if accept(rng, fcand - fx, t_acc, cfg.accept):
                    x, fx = cand, fcand
            n_iters += 1
            if cfg.local_search and state["f"] < best_before:
                xb, fb = run_local(state["x"], state["f"], fc.remaining)
                if fb <= fx:
                    x, fx = xb.copy(), fb
            if fc.remaining <= 0:
                break
            k += 1
    except _BudgetExhausted:
        pass
    if cfg.local_search and state["x"] is not None:
        run_local(state["x"], state["f"], ls_cap)
    return TrialResult(
        best_params=state["x"] if state["x"] is not None else lower.copy(),
        best_value=state["f"],
        n_evals=fc.n,
        n_iters=n_iters,
        seed=cfg.seed,
        wall_time=time.perf_counter() - start,
        history=history,
    )
