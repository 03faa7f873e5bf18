"""Bandwidth traces: file IO, synthetic generation, and byte-integration."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, NamedTuple, Sequence, Tuple

import numpy as np


class TraceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class BandwidthTrace:
    """Piecewise-constant throughput. ``points`` are (seconds, Mbit/s)."""

    points: Tuple[Tuple[float, float], ...]
    name: str = "trace"

    def __post_init__(self):
        if not self.points:
            raise ValueError("trace has no points")
        prev = -math.inf
        for t, bw in self.points:
            if not t > prev:
                raise ValueError(f"timestamps must be strictly increasing (at t={t})")
            if not bw > 0:
                raise ValueError(f"throughput must be positive (at t={t})")
            prev = t

    @property
    def times(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def mbps(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])


class Profile(NamedTuple):
    mean: float
    std: float
    lo: float
    hi: float


# per-dataset (mean, std, min, max) in Mbit/s
PROFILES: Dict[str, Profile] = {
    "3g": Profile(1.52, 0.72, 0.60, 4.59),
    "oboe": Profile(2.77, 1.32, 0.34, 5.70),
    "fcc": Profile(1.33, 0.55, 0.19, 3.43),
    "puffer": Profile(1.60, 0.88, 0.30, 3.60),
}


def load_trace(path, name: str | None = None) -> BandwidthTrace:
    """Read ``<seconds> <Mbit/s>`` lines; ``#`` starts a comment."""
    path = Path(path)
    points: List[Tuple[float, float]] = []
    prev = -math.inf
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 2:
                raise TraceFormatError(f"{path}:{lineno}: expected '<seconds> <Mbit/s>', got {raw.strip()!r}")
            try:
                t, bw = float(fields[0]), float(fields[1])
            except ValueError:
                raise TraceFormatError(f"{path}:{lineno}: non-numeric field in {raw.strip()!r}") from None
            if not (math.isfinite(t) and math.isfinite(bw)):
                raise TraceFormatError(f"{path}:{lineno}: non-finite value")
            if t <= prev:
                raise TraceFormatError(f"{path}:{lineno}: timestamp {t} is not increasing")
            if bw <= 0:
                raise TraceFormatError(f"{path}:{lineno}: throughput must be positive")
            points.append((t, bw))
            prev = t
    if not points:
        raise TraceFormatError(f"{path}: no data lines")
    return BandwidthTrace(tuple(points), name or path.stem)


def save_trace(trace: BandwidthTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {trace.name}\n")
        for t, bw in trace.points:
            fh.write(f"{t!r} {bw!r}\n")


def load_trace_dir(path) -> List[BandwidthTrace]:
    files = sorted(p for p in Path(path).iterdir() if p.is_file() and not p.name.startswith("."))
    return [load_trace(p) for p in files]


def generate_traces(seed: int, count: int, mean: float, std: float, lo: float, hi: float,
                    duration: float = 400.0, prefix: str = "synth") -> List[BandwidthTrace]:
    """Mean-reverting clipped Gaussian random walk with 1 s steps.

    The step noise has std ``0.3 * std`` and the reversion rate is chosen so
    the stationary spread matches ``std``. Each trace draws from its own
    stream spawned from ``seed``, so trace ``i`` is independent of ``count``.
    """
    if not lo < hi:
        raise ValueError("lo must be < hi")
    if count < 1:
        raise ValueError("count must be >= 1")
    step_std = 0.3 * std
    # (1 - k)^2 = 1 - (step_std / std)^2 gives stationary std == std
    revert = 1.0 - math.sqrt(max(1.0 - 0.09, 0.0))
    n = max(int(math.ceil(duration)), 1)
    out = []
    for i in range(count):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        x = float(np.clip(rng.normal(mean, std), lo, hi))
        noise = rng.normal(0.0, step_std, size=n)
        vals = np.empty(n)
        for k in range(n):
            vals[k] = x
            x = min(max(x + revert * (mean - x) + noise[k], lo), hi)
        pts = tuple((float(k), round(float(v), 6)) for k, v in enumerate(vals))
        out.append(BandwidthTrace(pts, f"{prefix}-{i:03d}"))
    return out


def generate_profile(profile: str, seed: int, count: int, duration: float = 400.0) -> List[BandwidthTrace]:
    p = PROFILES[profile]
    return generate_traces(seed, count, p.mean, p.std, p.lo, p.hi, duration, prefix=profile)


class TraceModel:
    """Cumulative-bytes view of a trace, repeated cyclically past its end.

    Simulation time 0 maps to the first timestamp. The last point holds for
    the same interval as the one before it (1 s for single-point traces).
    """

    def __init__(self, trace: BandwidthTrace):
        t = trace.times - trace.times[0]
        last_dt = t[-1] - t[-2] if len(t) > 1 else 1.0
        self.bounds = np.append(t, t[-1] + last_dt)
        rate = trace.mbps * 1e6 / 8.0  # bytes per second
        seg = rate * np.diff(self.bounds)
        self.cum = np.concatenate(([0.0], np.cumsum(seg)))
        self.period = float(self.bounds[-1])
        self.period_bytes = float(self.cum[-1])

    def bytes_at(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        k = np.floor(t / self.period)
        r = t - k * self.period
        return k * self.period_bytes + np.interp(r, self.bounds, self.cum)

    def time_at(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        k = np.floor(b / self.period_bytes)
        r = b - k * self.period_bytes
        return k * self.period + np.interp(r, self.cum, self.bounds)

    def finish_times(self, starts: Sequence[float], sizes: Sequence[float]) -> np.ndarray:
        """Completion time of downloading ``sizes`` bytes starting at ``starts``."""
        starts = np.asarray(starts, dtype=float)
        done = self.time_at(self.bytes_at(starts) + np.asarray(sizes, dtype=float))
        # interpolation round-off must never make a download finish before it starts
        return np.maximum(done, starts)
