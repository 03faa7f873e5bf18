import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crucible.bayesopt import (Dim, SearchSpace, SingularKernel, expected_improvement, gp_fit, gp_predict,
                               optimize)


def quad(params):
    return -(params["x"] - 0.3) ** 2


UNIT = SearchSpace((Dim("x", 0.0, 1.0),))


class Counter:
    def __init__(self, f):
        self.f, self.calls = f, 0

    def __call__(self, p):
        self.calls += 1
        return self.f(p)


# ---- optimize ------------------------------------------------------------

def test_converges_on_smooth_target():
    res = optimize(quad, UNIT, 10, seed=7, start_at_default=False)
    assert abs(res.best_point["x"] - 0.3) <= 0.05


def test_zero_budget_returns_defaults_without_calls():
    f = Counter(quad)
    space = SearchSpace((Dim("x", 0.0, 1.0, 0.8), Dim("y", -2.0, 2.0, 1.5)))
    res = optimize(f, space, 0, seed=1)
    assert f.calls == 0 and res.history == [] and res.best_point == {"x": 0.8, "y": 1.5}
    assert res.best_value is None


@pytest.mark.parametrize("budget", [1, 3, 5, 6, 12])
def test_exact_call_count(budget):
    f = Counter(quad)
    res = optimize(f, UNIT, budget, seed=3)
    assert f.calls == budget == len(res.history)
    assert res.best_value == max(o.value for o in res.history)


def test_deterministic_per_seed():
    a = optimize(quad, UNIT, 8, seed=11)
    b = optimize(quad, UNIT, 8, seed=11)
    c = optimize(quad, UNIT, 8, seed=12)
    assert [o.point for o in a.history] == [o.point for o in b.history]
    assert [o.point for o in a.history] != [o.point for o in c.history]


def test_first_point_is_exact_default():
    space = SearchSpace((Dim("a", 0.0, 3.0, 0.1 + 0.2),))
    seen = []
    optimize(lambda p: seen.append(p["a"]) or 0.0, space, 2, seed=0)
    assert seen[0] == 0.1 + 0.2


def test_histories_are_nested_so_best_grows_with_budget():
    prev_hist, prev_best = [], -math.inf
    space = SearchSpace((Dim("x", 0.0, 1.0, 0.9), Dim("y", 0.0, 1.0, 0.9)))
    f = lambda p: -((p["x"] - 0.2) ** 2 + (p["y"] - 0.6) ** 2)
    for b in range(1, 13):
        res = optimize(f, space, b, seed=5)
        pts = [o.point for o in res.history]
        assert pts[:len(prev_hist)] == prev_hist
        assert res.best_value >= prev_best
        prev_hist, prev_best = pts, res.best_value


def test_non_finite_values_recorded_as_worst_so_far():
    vals = iter([1.0, -2.0, math.nan, math.inf, 0.5])
    res = optimize(lambda p: next(vals), UNIT, 5, seed=0)
    assert [o.value for o in res.history] == [1.0, -2.0, -2.0, -2.0, 0.5]
    assert math.isnan(res.history[2].raw_value)
    assert res.best_value == 1.0 and res.best_index == 0


def test_first_value_non_finite_becomes_zero():
    vals = iter([math.nan, -1.0])
    res = optimize(lambda p: next(vals), UNIT, 2, seed=0)
    assert [o.value for o in res.history] == [0.0, -1.0]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(0.01, 50)), min_size=1, max_size=3),
       st.integers(0, 2 ** 31), st.integers(1, 9))
def test_best_point_inside_box(boxes, seed, budget):
    space = SearchSpace(tuple(Dim(f"d{i}", lo, lo + w) for i, (lo, w) in enumerate(boxes)))
    res = optimize(lambda p: -sum(v * v for v in p.values()), space, budget, seed=seed)
    for d in space.dims:
        assert d.lo <= res.best_point[d.name] <= d.hi
    assert all(0.0 <= c <= 1.0 for o in res.history for c in o.point)


def test_space_validation():
    with pytest.raises(ValueError):
        SearchSpace((Dim("a", 1.0, 1.0),))
    with pytest.raises(ValueError):
        SearchSpace((Dim("a", 0.0, 1.0), Dim("a", 0.0, 2.0)))
    with pytest.raises(ValueError):
        SearchSpace((Dim("a", 0.0, 1.0, 2.0),))
    with pytest.raises(ValueError):
        optimize(quad, UNIT, -1)


# ---- GP ------------------------------------------------------------------

def _oracle_posterior(x, y, xs, ls=0.2, jitter=1e-6):
    mu, s2 = y.mean(), max(y.var(), 1e-8)
    k = lambda a, b: s2 * np.exp(-0.5 * ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1) / ls ** 2)
    K = k(x, x) + s2 * jitter * np.eye(len(x))
    ks = k(xs, x)
    mean = mu + ks @ np.linalg.solve(K, y - mu)
    var = s2 - np.einsum("ij,ji->i", ks, np.linalg.solve(K, ks.T))
    return mean, var


def test_gp_matches_direct_linear_algebra():
    rng = np.random.default_rng(0)
    x = rng.random((7, 2))
    y = np.sin(3 * x[:, 0]) + x[:, 1]
    xs = rng.random((20, 2))
    m, v = gp_predict(gp_fit(x, y), xs)
    om, ov = _oracle_posterior(x, y, xs)
    assert np.allclose(m, om, atol=1e-8) and np.allclose(v, np.maximum(ov, 0), atol=1e-8)


def test_gp_interpolates_observations():
    # well-separated points; near-duplicates are smoothed by the jitter term
    x = np.linspace(0.0, 1.0, 6)[:, None]
    y = np.random.default_rng(1).normal(size=6)
    m, v = gp_predict(gp_fit(x, y), x)
    assert np.allclose(m, y, atol=1e-3) and np.all(v <= 1e-3)


def test_gp_single_observation():
    m, v = gp_predict(gp_fit([[0.4]], [2.5]), [[0.4]])
    assert m[0] == pytest.approx(2.5, abs=1e-3)


def test_gp_far_point_reverts_to_prior_variance():
    x = np.array([[0.0], [0.05], [0.1]])
    y = np.array([1.0, 2.0, 0.5])
    gp = gp_fit(x, y)
    _, v = gp_predict(gp, [[1.0]])
    assert v[0] >= 0.5 * gp.signal_var


def test_gp_duplicate_points_do_not_fail():
    gp = gp_fit([[0.5], [0.5], [0.5]], [1.0, 1.0, 1.0])
    m, _ = gp_predict(gp, [[0.5]])
    assert m[0] == pytest.approx(1.0)


def test_gp_reports_singular_kernel(monkeypatch):
    import crucible.bayesopt as bo
    attempts = []

    def refuse(a, lower):
        attempts.append(a[0, 0])
        raise np.linalg.LinAlgError("not positive definite")
    monkeypatch.setattr(bo, "cho_factor", refuse)
    with pytest.raises(SingularKernel):
        gp_fit([[0.1], [0.9]], [0.0, 1.0])
    # the original try plus three escalations, each ten times the last jitter
    assert len(attempts) == 4
    jit = np.array(attempts) / 0.25 - 1.0
    assert np.allclose(jit, [1e-6, 1e-5, 1e-4, 1e-3])


# ---- EI ------------------------------------------------------------------

def _ei_oracle(m, v, best):
    if v <= 0:
        return max(m - best, 0.0)
    s = math.sqrt(v)
    z = (m - best) / s
    cdf = 0.5 * (1 + math.erf(z / math.sqrt(2)))
    pdf = math.exp(-z * z / 2) / math.sqrt(2 * math.pi)
    return (m - best) * cdf + s * pdf


@settings(max_examples=300)
@given(st.floats(-10, 10), st.floats(0, 25), st.floats(-10, 10))
def test_ei_closed_form_and_non_negative(m, v, best):
    ei = expected_improvement(m, v, best)
    assert ei >= 0.0
    assert ei == pytest.approx(_ei_oracle(m, v, best), rel=1e-9, abs=1e-12)


@settings(max_examples=200)
@given(st.floats(-5, 5), st.floats(0, 10), st.floats(0, 10), st.floats(-5, 5))
def test_ei_monotone_in_variance(m, v1, v2, best):
    lo, hi = sorted((v1, v2))
    assert expected_improvement(m, hi, best) >= expected_improvement(m, lo, best) - 1e-12


def test_ei_limits():
    assert expected_improvement(1.0, 0.0, 1.0) == 0.0
    assert expected_improvement(5.0, 1e-18, 1.0) == pytest.approx(4.0)
    assert expected_improvement(0.0, 1.0, 0.0) > expected_improvement(0.0, 0.25, 0.0)
    arr = expected_improvement(np.array([0.0, 1.0]), np.array([1.0, 0.0]), 0.5)
    assert arr.shape == (2,) and arr[1] == pytest.approx(0.5)
