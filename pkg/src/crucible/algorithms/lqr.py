"""Discrete LQR gains for the CartPole linearization about the upright pose."""

from __future__ import annotations

import numpy as np

from ..envs.cartpole import FORCE_MAG, GRAVITY, LENGTH, MASSCART, MASSPOLE, TAU


class RiccatiDivergence(RuntimeError):
    pass


def linearized_cartpole(tau: float = TAU):
    """Euler-discretized (A, B) for state [x, x_dot, theta, theta_dot], input force in N."""
    total = MASSCART + MASSPOLE
    ml = MASSPOLE * LENGTH
    denom = LENGTH * (4.0 / 3.0 - MASSPOLE / total)
    a = np.zeros((4, 4))
    a[0, 1] = 1.0
    a[1, 2] = -ml * GRAVITY / (total * denom)
    a[2, 3] = 1.0
    a[3, 2] = GRAVITY / denom
    b = np.array([0.0, (1.0 + ml / (total * denom)) / total, 0.0, -1.0 / (total * denom)])
    return np.eye(4) + tau * a, tau * b.reshape(4, 1)


def lqr_gain(Q, R: float, tol: float = 1e-9, max_iter: int = 10000) -> np.ndarray:
    """Iterate the discrete Riccati recursion and return K with u = -K x.

    ``Q`` may be a 4x4 matrix or a length-4 diagonal.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim == 1:
        Q = np.diag(Q)
    if Q.shape != (4, 4):
        raise ValueError("Q must be 4x4 or a 4-vector diagonal")
    if np.any(np.linalg.eigvalsh((Q + Q.T) / 2) < -1e-12):
        raise ValueError("Q must be positive semidefinite")
    if not R > 0:
        raise ValueError("R must be positive")
    A, B = linearized_cartpole()
    P = Q.copy()
    for _ in range(max_iter):
        BtP = B.T @ P
        S = R + BtP @ B
        P_next = Q + A.T @ P @ A - (A.T @ P @ B) @ np.linalg.solve(S, BtP @ A)
        done = np.max(np.abs(P_next - P)) < tol
        P = P_next
        if done:
            BtP = B.T @ P
            return np.linalg.solve(R + BtP @ B, BtP @ A).ravel()
    raise RiccatiDivergence(f"Riccati recursion did not converge in {max_iter} iterations")


def lqr_force(K: np.ndarray, state) -> float:
    """Continuous control -K.x clipped to the actuator range (informational)."""
    return float(np.clip(-np.dot(K, state), -FORCE_MAG, FORCE_MAG))
