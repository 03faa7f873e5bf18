"""Model predictive bitrate control by exhaustive search over short horizons."""

from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Sequence

import numpy as np

from ..envs.abr import BUFFER_CAP, REBUF_PENALTY, AbrObservation

HISTORY_ERRORS = 5
TIE_TOL = 1e-9


def harmonic_mean(values: Sequence[float]) -> float:
    v = np.asarray(values, dtype=float)
    return float(len(v) / np.sum(1.0 / np.maximum(v, 1e-9)))


def max_prediction_error(speeds: Sequence[float]) -> float:
    """Largest relative error of the harmonic-mean predictor replayed over ``speeds``.

    The prediction for chunk k uses the speeds before it, so the first chunk
    contributes nothing.
    """
    worst = 0.0
    for k in range(max(1, len(speeds) - HISTORY_ERRORS), len(speeds)):
        pred = harmonic_mean(speeds[:k])
        worst = max(worst, abs(pred - speeds[k]) / max(speeds[k], 1e-9))
    return worst


@lru_cache(maxsize=64)
def _sequences(dim: int, horizon: int) -> np.ndarray:
    return np.array(list(itertools.product(range(dim), repeat=horizon)), dtype=np.int64)


def plan(obs: AbrObservation, horizon: int, throughput: float) -> int:
    """First level of the best ``horizon``-chunk sequence at constant ``throughput`` kbit/s.

    Ties (within ``TIE_TOL``, so float round-off cannot break them) go to the
    lexicographically smallest sequence.
    """
    m = obs.manifest
    h = max(1, min(horizon, m.chunk_count - obs.chunk_index))
    seqs = _sequences(m.dim, h)
    q = np.array(m.bitrates) / 1000.0
    sizes = np.array(m.chunk_sizes)
    buf = np.full(len(seqs), obs.buffer)
    prev = np.full(len(seqs), q[obs.last_level])
    total = np.zeros(len(seqs))
    for k in range(h):
        lv = seqs[:, k]
        dt = sizes[lv, obs.chunk_index + k] * 8.0 / 1000.0 / throughput
        rebuf = np.maximum(dt - buf, 0.0)
        buf = np.minimum(np.maximum(buf - dt, 0.0) + m.chunk_duration, BUFFER_CAP)
        total += q[lv] - REBUF_PENALTY * rebuf - np.abs(q[lv] - prev)
        prev = q[lv]
    return int(seqs[int(np.argmax(total >= total.max() - TIE_TOL)), 0])


def mpc_policy(horizon: float = 5, discount: float = 1.0):
    """Robust MPC: harmonic-mean throughput shrunk by ``1 + discount * max recent error``."""
    h = int(round(horizon))

    def choose(obs: AbrObservation) -> float:
        if not obs.past_speeds:
            return 0
        est = harmonic_mean(obs.past_speeds) / (1.0 + discount * max_prediction_error(obs.past_speeds))
        return plan(obs, h, est)

    return choose
