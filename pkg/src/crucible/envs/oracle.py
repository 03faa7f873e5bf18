"""Offline-optimal bitrate schedule with full knowledge of the trace.

Labels (time, buffer, quality-so-far, rebuffer-so-far, last level) are
expanded chunk by chunk. While the frontier is small, only provably
dominated labels are dropped, so the result is exact. Once it grows past
``exact_limit`` labels, labels sharing (last level, 0.5 s buffer bin) are
merged keeping the best QoE so far.

Label A dominates B (same last level) when A is no later, has no more
buffer-drain slack, and its QoE-so-far beats B's even after charging A for
the extra stall it could incur: t_A <= t_B, d_A <= d_B and
V_A - 4.3 (d_B - d_A) >= V_B, with d = t + buffer. Mimicking B's future
choices from A then finishes every later download no later than B does.
"""

from __future__ import annotations

import numpy as np

from .abr import BUFFER_CAP, REBUF_PENALTY, AbrEpisode, VideoManifest, scripted_policy, simulate_abr
from .traces import BandwidthTrace, TraceModel

BIN_SIZE = 0.5


def _prune_dominated(level, t, d, v):
    keep = np.ones(len(t), dtype=bool)
    for lv in np.unique(level):
        idx = np.flatnonzero(level == lv)
        if len(idx) < 2:
            continue
        ti, di, vi = t[idx], d[idx], v[idx]
        # rows dominate columns
        dom = ((ti[:, None] <= ti[None, :]) & (di[:, None] <= di[None, :])
               & (vi[:, None] - REBUF_PENALTY * (di[None, :] - di[:, None]) >= vi[None, :]))
        same = (ti[:, None] == ti[None, :]) & (di[:, None] == di[None, :]) & (vi[:, None] == vi[None, :])
        order = np.arange(len(idx))
        dom &= ~(same & (order[:, None] >= order[None, :]))
        keep[idx[dom.any(axis=0)]] = False
    return keep


def _merge_bins(level, buf, v):
    key = level * 100000 + np.floor(buf / BIN_SIZE).astype(np.int64)
    # best value first within each key, then first occurrence wins
    order = np.lexsort((-v, key))
    _, first = np.unique(key[order], return_index=True)
    keep = np.zeros(len(v), dtype=bool)
    keep[order[first]] = True
    return keep


def optimal_levels(trace: BandwidthTrace, manifest: VideoManifest, exact_limit: int = 1024):
    model = TraceModel(trace)
    L = manifest.chunk_duration
    dim = manifest.dim
    q = np.array([manifest.quality(i) for i in range(dim)])
    sizes = np.array(manifest.chunk_sizes)

    # chunk 0: startup, no rebuffer charged
    level = np.arange(dim)
    t = model.finish_times(np.zeros(dim), sizes[:, 0])
    buf = np.full(dim, L)
    over = buf > BUFFER_CAP
    t = np.where(over, t + buf - BUFFER_CAP, t)
    buf = np.minimum(buf, BUFFER_CAP)
    qsum = q.copy()
    rsum = np.zeros(dim)
    history = [(level, np.full(dim, -1))]

    for n in range(1, manifest.chunk_count):
        m = len(t)
        parent = np.repeat(np.arange(m), dim)
        nl = np.tile(np.arange(dim), m)
        start = t[parent]
        f = model.finish_times(start, sizes[nl, n])
        dt = f - start
        b0 = buf[parent]
        rebuf = np.maximum(0.0, dt - b0)
        nb = np.maximum(b0 - dt, 0.0) + L
        nt = np.where(nb > BUFFER_CAP, f + nb - BUFFER_CAP, f)
        nb = np.minimum(nb, BUFFER_CAP)
        nq = qsum[parent] + q[nl] - np.abs(q[nl] - q[level[parent]])
        nr = rsum[parent] + rebuf
        v = nq - REBUF_PENALTY * nr
        if len(v) <= exact_limit:
            keep = _prune_dominated(nl, nt, nt + nb, v)
        else:
            keep = _merge_bins(nl, nb, v)
        level, t, buf, qsum, rsum = nl[keep], nt[keep], nb[keep], nq[keep], nr[keep]
        history.append((level, parent[keep]))

    v = qsum - REBUF_PENALTY * rsum
    i = int(np.argmax(v))
    best = float(v[i])
    out = []
    for lv, par in reversed(history):
        out.append(int(lv[i]))
        i = int(par[i])
    return out[::-1], best


def offline_optimal_abr(trace: BandwidthTrace, manifest: VideoManifest,
                        exact_limit: int = 1024, record: bool = False) -> AbrEpisode:
    """Best QoE_lin schedule for ``trace``; the first level is chosen freely."""
    levels, _ = optimal_levels(trace, manifest, exact_limit)
    return simulate_abr(scripted_policy(levels), trace, manifest, startup_level=levels[0], record=record)
