"""CartPole-v1 dynamics (explicit Euler, binary +/-10 N force)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List

import numpy as np

from ..dsl.errors import EvalError
from .core import StepTriplet

GRAVITY = 9.8
MASSCART = 1.0
MASSPOLE = 0.1
LENGTH = 0.5  # half the pole length
FORCE_MAG = 10.0
TAU = 0.02
THETA_LIMIT = 12 * 2 * math.pi / 360
X_LIMIT = 2.4
INTEGRAL_CLAMP = 10.0
MAX_STEPS = 500


@dataclass(frozen=True)
class CartPoleState:
    x: float
    x_dot: float
    theta: float
    theta_dot: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.x_dot, self.theta, self.theta_dot)):
            raise ValueError("cartpole state must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.x_dot, self.theta, self.theta_dot])


@dataclass(frozen=True)
class CartPoleObservation:
    x: float
    x_dot: float
    theta: float
    theta_dot: float
    theta_int: float
    step: int


@dataclass
class CartPoleEpisode:
    steps: int
    failed: bool = False
    triplets: List[StepTriplet] = field(default_factory=list)


def step(state: CartPoleState, push_right: bool) -> CartPoleState:
    """One Euler step; depends only on (state, action)."""
    force = FORCE_MAG if push_right else -FORCE_MAG
    total = MASSCART + MASSPOLE
    ml = MASSPOLE * LENGTH
    cos_t = math.cos(state.theta)
    sin_t = math.sin(state.theta)
    temp = (force + ml * state.theta_dot ** 2 * sin_t) / total
    theta_acc = (GRAVITY * sin_t - cos_t * temp) / (LENGTH * (4.0 / 3.0 - MASSPOLE * cos_t ** 2 / total))
    x_acc = temp - ml * theta_acc * cos_t / total
    return CartPoleState(
        x=state.x + TAU * state.x_dot,
        x_dot=state.x_dot + TAU * x_acc,
        theta=state.theta + TAU * state.theta_dot,
        theta_dot=state.theta_dot + TAU * theta_acc,
    )


def terminated(state: CartPoleState) -> bool:
    return abs(state.x) > X_LIMIT or abs(state.theta) > THETA_LIMIT


def initial_state(seed: int) -> CartPoleState:
    v = np.random.default_rng(seed).uniform(-0.05, 0.05, size=4)
    return CartPoleState(*(float(a) for a in v))


def run_cartpole(policy: Callable[[CartPoleObservation], float], seed: int,
                 max_steps: int = MAX_STEPS, record: bool = True) -> CartPoleEpisode:
    """Run one episode. The policy returns a force command; positive pushes right.

    Steps are counted the way Gym counts reward: the terminating step counts.
    """
    s = initial_state(seed)
    integral = 0.0
    triplets: List[StepTriplet] = []
    for k in range(max_steps):
        obs = CartPoleObservation(s.x, s.x_dot, s.theta, s.theta_dot, integral, k)
        try:
            command = policy(obs)
        except EvalError as exc:
            if record:
                triplets.append(StepTriplet(_fmt_state(obs), "error", f"policy failed: {exc}"))
            return CartPoleEpisode(k, True, triplets)
        right = command > 0
        s = step(s, right)
        integral = min(max(integral + s.theta * TAU, -INTEGRAL_CLAMP), INTEGRAL_CLAMP)
        done = terminated(s)
        if record:
            triplets.append(StepTriplet(
                _fmt_state(obs),
                f"push {'right' if right else 'left'} (command {command:.4g})",
                ("terminated: " if done else "") + f"x={s.x:.3f} theta={s.theta:.4f}",
            ))
        if done:
            return CartPoleEpisode(k + 1, False, triplets)
    return CartPoleEpisode(max_steps, False, triplets)


def simulate_cartpole(policy: Callable[[CartPoleObservation], float], seed: int,
                      max_steps: int = MAX_STEPS) -> int:
    return run_cartpole(policy, seed, max_steps, record=False).steps


def _fmt_state(o: CartPoleObservation) -> str:
    return (f"step={o.step} x={o.x:.3f} x_dot={o.x_dot:.3f} "
            f"theta={o.theta:.4f} theta_dot={o.theta_dot:.4f}")
