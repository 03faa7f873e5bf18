import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crucible.potential import (CharacteristicVector, ScoreMatrix, characteristic_vectors, distance,
                                ideal_environment, improvement_ratio, normalize_scores, potential, similarity)


def row_matrix(*rows, envs=None):
    envs = envs or [f"e{k}" for k in range(len(rows[0]))]
    return ScoreMatrix([f"p{j}" for j in range(len(rows))], envs, rows)


# ---- normalization -----------------------------------------------------------

def test_normalize_examples():
    n = normalize_scores(row_matrix([2, 4, 6], [3, 3, 3], [-1, 0, 1]))
    assert n.tolist() == [[0.0, 0.5, 1.0], [0.0, 0.0, 0.0], [0.0, 0.5, 1.0]]
    assert normalize_scores(row_matrix([-1, 1])).tolist() == [[0.0, 1.0]]


def test_characteristic_vectors_are_columns():
    m = row_matrix([1, 2, 3], [9, 5, 1], envs=["a", "b", "c"])
    vs = characteristic_vectors(m)
    assert [v.env for v in vs] == ["a", "b", "c"]
    assert [v.components for v in vs] == [(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)]


def test_score_matrix_validation():
    with pytest.raises(ValueError):
        ScoreMatrix(["p"], ["a", "b"], [[1.0]])
    with pytest.raises(ValueError):
        ScoreMatrix(["p"], ["a"], [[math.nan]])
    with pytest.raises(ValueError):
        ScoreMatrix(["p"], ["a", "a"], [[1.0, 2.0]])


# ---- distance and similarity -------------------------------------------------

def test_distance_examples():
    assert distance([0.3, 0.4], [0.3, 0.4]) == 0.0
    assert distance([0, 1], [1, 0]) == 1.0
    assert distance([0.0, 1.0], [0.6, 0.2]) == pytest.approx(math.sqrt(0.5), abs=1e-12)
    with pytest.raises(ValueError):
        distance([0, 1], [0, 1, 2])


def test_similarity_examples():
    assert similarity([0.2, 0.9], [0.2, 0.9]) == 1.0
    assert similarity([0, 1], [1, 0]) == 0.0
    assert similarity([0.0, 1.0], [0.6, 0.2]) == pytest.approx(1 - math.sqrt(0.5), abs=1e-12)
    assert round(similarity([0.0, 1.0], [0.6, 0.2]), 4) == 0.2929


unit_vecs = st.integers(1, 6).flatmap(
    lambda n: st.tuples(*[st.lists(st.floats(0, 1), min_size=n, max_size=n) for _ in range(3)]))


@settings(max_examples=300)
@given(unit_vecs)
def test_distance_is_a_metric_on_normalized_vectors(abc):
    a, b, c = abc
    assert distance(a, b) == distance(b, a)
    assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-12
    assert 0.0 <= distance(a, b) <= 1.0
    assert 0.0 <= similarity(a, b) <= 1.0
    assert similarity(a, a) == 1.0


# ---- ideal environment ---------------------------------------------------------

def test_ideal_prefers_dominated_environment():
    m = row_matrix([1.0, 1.0], [2.0, 3.0], envs=["A", "B"])
    assert ideal_environment({"A": 5.0, "B": 2.0}, m) == "A"


def test_ideal_tie_goes_to_first_name():
    m = row_matrix([0.0, 10.0, 4.0], [1.0, 20.0, 6.0], envs=["c", "a", "b"])
    # standing 0.5 everywhere
    assert ideal_environment({"c": 0.5, "a": 15.0, "b": 5.0}, m) == "a"


def test_ideal_with_constant_probes():
    m = row_matrix([1.0, 2.0], [1.0, 4.0], envs=["flat", "wide"])
    assert ideal_environment({"flat": 1.5, "wide": 3.0}, m) == "flat"   # +1 beats 0.5
    assert ideal_environment({"flat": 0.5, "wide": 1.0}, m) == "wide"   # -1 loses to -0.5


def _ideal_brute(alg, probes, envs):
    standing = {}
    for k, e in enumerate(envs):
        col = [p[k] for p in probes]
        lo, hi = min(col), max(col)
        standing[e] = (alg[e] - lo) / (hi - lo) if hi > lo else (alg[e] > lo) - (alg[e] < lo)
    top = max(standing.values())
    return min(e for e in envs if standing[e] == top)


@settings(max_examples=200)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=4),
       st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_ideal_matches_exhaustive_two_env(probes, alg):
    envs = ["x", "y"]
    m = row_matrix(*[list(p) for p in probes], envs=envs)
    assert ideal_environment(dict(zip(envs, alg)), m) == _ideal_brute(dict(zip(envs, alg)), probes, envs)


# ---- potential -------------------------------------------------------------------

def vecs(*comps):
    return [CharacteristicVector(f"e{k}", tuple(c)) for k, c in enumerate(comps)]


def test_potential_worked_example():
    # sims 1.0 and 0.5 from distances 0 and 0.5
    vs = vecs([0.0, 0.0], [0.5, 0.5])
    r = potential("a", {"e0": 1.0, "e1": 1.0}, {"e0": 1.2, "e1": 1.1}, "e0", vs)
    assert [g.sim for g in r.per_env] == [1.0, 0.5]
    assert r.potential == pytest.approx(0.125, abs=1e-12)
    assert r.potential_std == pytest.approx(np.std([0.2, 0.05]), abs=1e-12)
    assert r.improvement == pytest.approx(0.15, abs=1e-12)


def test_potential_trivial_cases():
    vs = vecs([0.1, 0.9], [0.7, 0.2])
    zero = potential("a", {"e0": 3.0, "e1": 2.0}, {"e0": 3.0, "e1": 2.0}, "e1", vs)
    assert zero.potential == 0.0
    one = potential("a", {"e0": 1.0}, {"e0": 1.7}, "e0", vecs([0.3, 0.3]))
    assert one.potential == pytest.approx(0.7)


def test_potential_validation():
    vs = vecs([0.0], [1.0])
    with pytest.raises(ValueError):
        potential("a", {"e0": 0, "e1": 0}, {"e0": 0, "e1": 0}, "zz", vs)
    with pytest.raises(ValueError):
        potential("a", {"e0": 0}, {"e0": 0, "e1": 0}, "e0", vs)
    with pytest.raises(ValueError):
        potential("a", {"e0": 0, "e1": 0}, {"e0": 0, "e1": 0}, "e0", vs, weighting="cosine")


def test_distance_weighting_flag():
    vs = vecs([0.0, 0.0], [0.5, 0.5])
    r = potential("a", {"e0": 0.0, "e1": 0.0}, {"e0": 0.2, "e1": 0.1}, "e0", vs, weighting="distance")
    assert [g.weighted_gain for g in r.per_env] == pytest.approx([0.2, 0.2])
    assert r.to_dict()["weighting"] == "distance"


@settings(max_examples=100)
@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=2, max_size=5),
       st.integers(0, 2 ** 32 - 1), st.floats(-4, 4))
def test_potential_linear_in_gains(scores, seed, c):
    rng = np.random.default_rng(seed)
    vs = vecs(*rng.random((len(scores), 3)))
    orig = {v.env: s[0] for v, s in zip(vs, scores)}
    tuned = {v.env: s[1] for v, s in zip(vs, scores)}
    scaled = {e: orig[e] + c * (tuned[e] - orig[e]) for e in orig}
    base = potential("a", orig, tuned, "e0", vs).potential
    assert potential("a", orig, scaled, "e0", vs).potential == pytest.approx(c * base, abs=1e-9)


@settings(max_examples=100)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 5), st.integers(1, 4))
def test_degenerate_constant_is_immaterial(seed, n_env, n_probe):
    rng = np.random.default_rng(seed)
    rows = rng.normal(size=(n_probe, n_env))
    rows[0, :] = 2.5  # one constant probe row
    m = row_matrix(*rows.tolist())
    gains = {e: float(g) for e, g in zip(m.envs, rng.normal(size=n_env))}
    zeros = {e: 0.0 for e in m.envs}
    p = [potential("a", zeros, gains, "e0", characteristic_vectors(m, degenerate=d)).potential for d in (0.0, 0.5)]
    assert p[0] == pytest.approx(p[1], abs=1e-12)


def test_two_env_fixture_end_to_end():
    # probe rows normalize to [0,1] and [1,0]; algorithm best relative to probes in e0
    m = row_matrix([1.0, 2.0], [4.0, 3.0])
    vs = characteristic_vectors(m)
    ideal = ideal_environment({"e0": 5.0, "e1": 2.5}, m)
    assert ideal == "e0" and distance(vs[0], vs[1]) == 1.0
    r = potential("a", {"e0": 1.0, "e1": 1.0}, {"e0": 1.3, "e1": 2.0}, ideal, vs)
    assert r.potential == pytest.approx(0.15, abs=1e-12)  # (0.3 * 1 + 1.0 * 0) / 2


# ---- improvement ratio ---------------------------------------------------------

def test_improvement_ratio():
    assert improvement_ratio(1.441 * 2.0, 2.0) == pytest.approx(0.441, abs=1e-12)
    assert improvement_ratio(3.0, 3.0) == 0.0
    assert improvement_ratio(1.0, 0.0) is None
    # negative baselines: improving means moving up
    assert improvement_ratio(-8.0, -10.0) == pytest.approx(0.2)
    assert improvement_ratio(-12.0, -10.0) == pytest.approx(-0.2)
