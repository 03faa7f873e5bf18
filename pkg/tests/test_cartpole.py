import math

import numpy as np
import pytest
import scipy.linalg

from crucible.algorithms import get_controller, lqr_gain
from crucible.algorithms.lqr import RiccatiDivergence, linearized_cartpole
from crucible.envs.cartpole import (CartPoleState, initial_state, run_cartpole, simulate_cartpole, step,
                                    terminated)
from crucible.envs.evaluate import evaluate_env, resolve_env


def test_one_step_from_rest_matches_reference_dynamics():
    s = step(CartPoleState(0.0, 0.0, 0.0, 0.0), True)
    assert s.x_dot == pytest.approx(0.195, abs=1e-3)
    assert s.theta_dot == pytest.approx(-0.293, abs=1e-3)
    assert s.x == 0.0 and s.theta == 0.0


def test_step_is_a_pure_function_of_state_and_action():
    s = CartPoleState(0.01, -0.2, 0.03, 0.1)
    assert step(s, False) == step(s, False)
    assert step(s, True) != step(s, False)


def test_termination_bounds():
    assert terminated(CartPoleState(2.41, 0, 0, 0))
    assert terminated(CartPoleState(0, 0, 12.01 * math.pi / 180, 0))
    assert not terminated(CartPoleState(2.39, 0, 11.9 * math.pi / 180, 0))


def test_initial_state_range_and_determinism():
    for seed in range(20):
        s = initial_state(seed).as_array()
        assert np.all(np.abs(s) <= 0.05)
    assert initial_state(3) == initial_state(3)


def test_pd_policy_reaches_ceiling():
    pd = lambda o: 10 * o.theta + o.theta_dot
    assert [simulate_cartpole(pd, s) for s in range(20)] == [500] * 20


def test_bang_bang_is_poor():
    steps = [simulate_cartpole(lambda o: o.theta, s) for s in range(20)]
    assert np.mean(steps) < 100


def test_max_steps_cap_and_gym_step_counting():
    assert simulate_cartpole(lambda o: 10 * o.theta + o.theta_dot, 0, max_steps=37) == 37
    # constant push right fails quickly; the terminating step counts
    ep = run_cartpole(lambda o: 1.0, 0)
    assert 1 <= ep.steps < 100 and ep.triplets[-1].outcome.startswith("terminated")


def test_bundled_controllers_on_cartpole_env():
    env = resolve_env("cartpole:v1")
    assert evaluate_env(get_controller("pd"), env).score == 500.0
    assert evaluate_env(get_controller("lqr"), env).score == 500.0
    assert evaluate_env(get_controller("bang_bang"), env).score < 100


# ---- LQR -----------------------------------------------------------------

def _dare_gain(Q, R):
    A, B = linearized_cartpole()
    P = scipy.linalg.solve_discrete_are(A, B, np.asarray(Q), np.array([[R]]))
    return np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A).ravel()


def test_lqr_matches_scipy_riccati_solution():
    K = lqr_gain(np.eye(4), 1.0)
    assert np.allclose(K, _dare_gain(np.eye(4), 1.0), rtol=1e-6, atol=1e-8)


def test_lqr_closed_loop_survives():
    K = lqr_gain(np.eye(4), 1.0)
    pol = lambda o: -float(np.dot(K, [o.x, o.x_dot, o.theta, o.theta_dot]))
    assert [simulate_cartpole(pol, s) for s in range(20)] == [500] * 20


@pytest.mark.parametrize("c", [0.01, 3.0, 250.0])
def test_lqr_scale_invariance(c):
    assert np.allclose(lqr_gain(c * np.eye(4), c * 1.0), lqr_gain(np.eye(4), 1.0), atol=1e-6)


def test_lqr_effort_penalty_shrinks_gain():
    assert np.linalg.norm(lqr_gain(np.eye(4), 100.0)) < np.linalg.norm(lqr_gain(np.eye(4), 1.0))


def test_lqr_input_validation():
    with pytest.raises(ValueError):
        lqr_gain(np.eye(4), 0.0)
    with pytest.raises(ValueError):
        lqr_gain(-np.eye(4), 1.0)
    with pytest.raises(ValueError):
        lqr_gain(np.eye(3), 1.0)
    with pytest.raises(RiccatiDivergence):
        lqr_gain(np.eye(4), 1.0, max_iter=2)


def test_bundled_lqr_gains_are_riccati_gains():
    ctl = get_controller("lqr")
    p = ctl.params
    bundled = np.array([p["k_x"], p["k_x_dot"], p["k_theta"], p["k_theta_dot"]])
    # the program returns -(k . x), i.e. u = -K x with K the bundled vector
    assert np.allclose(bundled, lqr_gain(np.eye(4), 1.0), atol=1e-6)
