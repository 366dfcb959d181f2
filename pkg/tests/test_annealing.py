import math

import numpy as np
import pytest
from scipy import stats as sps

from gkslgate.annealing import (AnnealConfig, acceptance_probability, accept, dual_anneal,
                                local_search, local_search_budget, make_rng, visit_sample,
                                visiting_temperature, wrap_into_box)


def sphere(x):
    return float(np.sum(x**2))


def rastrigin(x):
    return float(10 * len(x) + np.sum(x**2 - 10 * np.cos(2 * np.pi * x)))


def test_config_validation():
    with pytest.raises(ValueError):
        AnnealConfig(visit=1.0)
    with pytest.raises(ValueError):
        AnnealConfig(initial_temp=0)
    with pytest.raises(ValueError):
        AnnealConfig(maxfun=0)
    with pytest.raises(ValueError):
        AnnealConfig(restart_temp_ratio=1.0)


def test_defaults():
    cfg = AnnealConfig()
    assert (cfg.initial_temp, cfg.maxfun, cfg.maxiter) == (3e4, 30000, 3000)
    assert (cfg.visit, cfg.accept, cfg.restart_temp_ratio) == (2.62, -5.0, 2e-5)


def test_visiting_temperature():
    cfg = AnnealConfig()
    assert visiting_temperature(1, cfg) == pytest.approx(3e4, rel=1e-15)
    expected = 3e4 * (2**1.62 - 1) / (3**1.62 - 1)
    assert visiting_temperature(2, cfg) == pytest.approx(expected, rel=1e-13)
    temps = [visiting_temperature(k, cfg) for k in range(1, 10_001)]
    assert all(a > b for a, b in zip(temps, temps[1:]))
    with pytest.raises(ValueError):
        visiting_temperature(0, cfg)


def test_visit_sample_symmetric():
    rng = make_rng(1)
    draws = visit_sample(rng, 1.0, 2.62, 100_000)
    # heavy tails make the plain standard error useless; check the sign balance and median
    n_pos = int(np.sum(draws > 0))
    assert abs(n_pos - 50_000) <= 5 * math.sqrt(100_000 * 0.25)
    robust_se = 1.2533 * sps.iqr(draws) / 1.349 / math.sqrt(len(draws))
    assert abs(np.median(draws)) <= 5 * robust_se


def test_visit_sample_mean_light_tail():
    rng = make_rng(2)
    draws = visit_sample(rng, 1.0, 1.5, 100_000)
    assert abs(draws.mean()) <= 5 * draws.std() / math.sqrt(len(draws))


def test_visit_sample_heavy_tail():
    rng = make_rng(3)
    draws = visit_sample(rng, 1.0, 2.62, 100_000)
    assert sps.kurtosis(draws, fisher=False) > 3.0


def test_visit_sample_gaussian_limit():
    rng = make_rng(4)
    draws = visit_sample(rng, 1.0, 1.01, 100_000)
    ks = sps.kstest(draws, "norm", args=(draws.mean(), draws.std())).statistic
    assert ks < 0.05


def test_visit_sample_cap():
    rng = make_rng(5)
    draws = visit_sample(rng, 3e4, 2.62, 10_000, cap=1e8)
    assert np.all(np.abs(draws) <= 1e8)
    assert np.all(np.isfinite(draws))


def test_accept_rules():
    rng = make_rng(0)
    assert all(accept(rng, 0.0, 1.0, -5.0) for _ in range(100))
    assert all(accept(rng, -3.0, 1.0, -5.0) for _ in range(100))
    assert acceptance_probability(10.0, 1.0, -5.0) == 0.0
    assert not any(accept(rng, 10.0, 1.0, -5.0) for _ in range(100))


def test_accept_monte_carlo():
    rng = make_rng(9)
    p = acceptance_probability(0.1, 1.0, -5.0)
    assert p == pytest.approx(0.4 ** (1 / 6), rel=1e-14)
    n = 100_000
    hits = sum(accept(rng, 0.1, 1.0, -5.0) for _ in range(n))
    assert abs(hits / n - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_wrap_into_box():
    lo, hi = np.array([-1.0, 0.0]), np.array([1.0, 10.0])
    out = wrap_into_box(np.array([1.5, -3.0]), lo, hi)
    np.testing.assert_allclose(out, [-0.5, 7.0])
    out = wrap_into_box(np.array([1.0, 1e9]), lo, hi)
    assert np.all(out >= lo) and np.all(out < hi)
    inside = np.array([0.3, 4.0])
    np.testing.assert_array_equal(wrap_into_box(inside, lo, hi), inside)


def test_local_search_interior_quadratic():
    c = np.array([0.3, -1.2, 2.0, 0.7, -4.1])
    f = lambda x: float(np.sum((x - c) ** 2))  # noqa: E731
    x, fx, used = local_search(f, np.zeros(5), np.full(5, -5.0), np.full(5, 5.0), 200 * 5)
    assert np.max(np.abs(x - c)) <= 1e-6
    assert used <= 1000
    assert fx <= f(np.zeros(5))


def test_local_search_boundary_minimum():
    c = np.array([7.0, -1.0, -9.0])
    f = lambda x: float(np.sum((x - c) ** 2))  # noqa: E731
    lo, hi = np.full(3, -5.0), np.full(3, 5.0)
    x, fx, used = local_search(f, np.zeros(3), lo, hi, 600)
    np.testing.assert_allclose(x, np.clip(c, lo, hi), atol=1e-6)
    assert np.all(x >= lo) and np.all(x <= hi)


def test_local_search_budget_one():
    x0 = np.array([1.0, 2.0])
    x, fx, used = local_search(sphere, x0, np.full(2, -5.0), np.full(2, 5.0), 1)
    assert used == 1
    np.testing.assert_array_equal(x, x0)
    assert fx == sphere(x0)


def test_sphere():
    res = dual_anneal(sphere, (np.full(2, -5.0), np.full(2, 5.0)), AnnealConfig(maxfun=2000, seed=3))
    assert res.best_value <= 1e-6
    assert res.n_evals <= 2000 + local_search_budget(2)


def test_determinism():
    bnds = (np.full(3, -5.12), np.full(3, 5.12))
    a = dual_anneal(rastrigin, bnds, AnnealConfig(maxfun=3000, seed=77))
    b = dual_anneal(rastrigin, bnds, AnnealConfig(maxfun=3000, seed=77))
    np.testing.assert_array_equal(a.best_params, b.best_params)
    assert a.best_value == b.best_value
    assert a.history == b.history and a.n_evals == b.n_evals
    c = dual_anneal(rastrigin, bnds, AnnealConfig(maxfun=3000, seed=78))
    assert not np.array_equal(a.best_params, c.best_params)


def test_candidates_stay_in_box_and_history_monotone():
    lo, hi = np.array([-1.0, 2.0, 0.0]), np.array([1.0, 3.0, 0.5])
    seen = []

    def f(x):
        seen.append(x.copy())
        return rastrigin(x)

    res = dual_anneal(f, (lo, hi), AnnealConfig(maxfun=1500, seed=5))
    arr = np.array(seen)
    assert np.all(arr >= lo) and np.all(arr <= hi)
    values = [v for _, v in res.history]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert res.best_value == values[-1] == rastrigin(res.best_params)
    assert res.n_evals == len(seen)
    assert res.n_evals <= 1500 + local_search_budget(3)


def test_errors_become_infinite():
    calls = {"n": 0}

    def flaky(x):
        calls["n"] += 1
        if calls["n"] % 3 == 0:
            raise FloatingPointError("boom")
        if calls["n"] % 5 == 0:
            return float("nan")
        return sphere(x)

    res = dual_anneal(flaky, (np.full(2, -5.0), np.full(2, 5.0)), AnnealConfig(maxfun=500, seed=1))
    assert math.isfinite(res.best_value)


def test_greedy_without_local_search_terminates():
    cfg = AnnealConfig(maxfun=800, seed=2, local_search=False, accept=-1e12)
    lo, hi = np.full(4, -5.12), np.full(4, 5.12)
    res = dual_anneal(rastrigin, (lo, hi), cfg)
    assert res.n_evals <= 800
    assert np.all(res.best_params >= lo) and np.all(res.best_params <= hi)


def test_maxiter_stops():
    res = dual_anneal(sphere, (np.full(2, -1.0), np.full(2, 1.0)),
                      AnnealConfig(maxiter=3, maxfun=10_000, seed=0, local_search=False))
    assert res.n_iters == 3
    assert res.n_evals == 1 + 3 * 4


def test_restart_draws_new_point():
    # tiny restart threshold ratio close to 1 forces a restart every iteration
    cfg = AnnealConfig(maxiter=5, maxfun=10_000, seed=0, local_search=False,
                       restart_temp_ratio=0.999)
    res = dual_anneal(sphere, (np.full(2, -1.0), np.full(2, 1.0)), cfg)
    # initial point + per iteration: restart point + 4 chain proposals (k>=2 restarts)
    assert res.n_evals == 1 + 4 + 4 * 5
