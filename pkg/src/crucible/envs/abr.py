"""Chunk-level video streaming simulator with QoE_lin scoring."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

from ..dsl.errors import EvalError
from .core import StepTriplet
from .traces import BandwidthTrace, TraceModel

REBUF_PENALTY = 4.3
BUFFER_CAP = 60.0
HISTORY = 5
DEFAULT_BITRATES = (300.0, 750.0, 1200.0, 1850.0, 2850.0, 4300.0)
DEFAULT_STARTUP_KBPS = 750.0


@dataclass(frozen=True)
class VideoManifest:
    chunk_duration: float = 4.0
    bitrates: Tuple[float, ...] = DEFAULT_BITRATES  # kbit/s
    chunk_count: int = 48
    chunk_sizes: Optional[Tuple[Tuple[float, ...], ...]] = None  # bytes, [level][chunk]

    def __post_init__(self):
        if self.chunk_count < 1:
            raise ValueError("chunk_count must be >= 1")
        if self.chunk_duration <= 0:
            raise ValueError("chunk_duration must be positive")
        if not self.bitrates or any(b <= a for a, b in zip(self.bitrates, self.bitrates[1:])):
            raise ValueError("bitrates must be strictly increasing")
        object.__setattr__(self, "bitrates", tuple(float(b) for b in self.bitrates))
        if self.chunk_sizes is None:
            sizes = tuple(tuple(b * 1000.0 * self.chunk_duration / 8.0 for _ in range(self.chunk_count))
                          for b in self.bitrates)
            object.__setattr__(self, "chunk_sizes", sizes)
        else:
            sizes = tuple(tuple(float(s) for s in row) for row in self.chunk_sizes)
            if len(sizes) != len(self.bitrates) or any(len(r) != self.chunk_count for r in sizes):
                raise ValueError("chunk_sizes must be [levels][chunk_count]")
            object.__setattr__(self, "chunk_sizes", sizes)

    @property
    def dim(self) -> int:
        return len(self.bitrates)

    def quality(self, level: int) -> float:
        """q(R): bitrate in Mbit/s."""
        return self.bitrates[level] / 1000.0

    def startup_level(self) -> int:
        """Index of the highest level not above 750 kbit/s (0 if none)."""
        ok = [i for i, b in enumerate(self.bitrates) if b <= DEFAULT_STARTUP_KBPS]
        return ok[-1] if ok else 0

    def to_dict(self) -> dict:
        return {
            "chunk_duration_s": self.chunk_duration,
            "bitrates_kbps": list(self.bitrates),
            "chunk_count": self.chunk_count,
            "chunk_sizes_bytes": [list(r) for r in self.chunk_sizes],
        }


def load_manifest(path) -> VideoManifest:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        return VideoManifest(
            chunk_duration=float(data["chunk_duration_s"]),
            bitrates=tuple(data["bitrates_kbps"]),
            chunk_count=int(data["chunk_count"]),
            chunk_sizes=data.get("chunk_sizes_bytes"),
        )
    except KeyError as exc:
        raise ValueError(f"{path}: manifest missing key {exc}") from None


@dataclass(frozen=True)
class AbrObservation:
    buffer: float
    speed: float  # kbit/s
    chunk_len: float
    dim: int
    last_level: int
    chunk_index: int
    chunks_left: int
    last_download_time: float
    last_rebuffer: float
    bitrates: Tuple[float, ...]
    past_speeds: Tuple[float, ...]
    next_sizes: Tuple[float, ...]
    manifest: VideoManifest = field(repr=False, compare=False, default=None)

    def inputs(self) -> dict:
        """Inputs for the ``abr`` controller binding."""
        return {
            "buffer": self.buffer,
            "speed": self.speed,
            "chunk_len": self.chunk_len,
            "dim": float(self.dim),
            "last_level": float(self.last_level),
            "chunk_index": float(self.chunk_index),
            "chunks_left": float(self.chunks_left),
            "last_download_time": self.last_download_time,
            "last_rebuffer": self.last_rebuffer,
            "bitrates": self.bitrates,
            "past_speeds": self.past_speeds,
            "next_sizes": self.next_sizes,
        }


@dataclass
class AbrEpisode:
    chosen_levels: List[int]
    rebuffer: List[float]
    buffer_trajectory: List[float]
    download_times: List[float]
    startup_delay: float
    qoe: float
    triplets: List[StepTriplet] = field(default_factory=list)
    failed: bool = False
    error: Optional[str] = None

    @property
    def total_rebuffer(self) -> float:
        return sum(self.rebuffer)


def qoe_lin(levels: Sequence[int], rebuffers: Sequence[float], manifest: VideoManifest) -> float:
    """Sum of quality, minus 4.3 x stall seconds, minus quality switch magnitudes."""
    if len(levels) != len(rebuffers):
        raise ValueError("levels and rebuffers must have equal length")
    q = [manifest.quality(lv) for lv in levels]
    smooth = sum(abs(b - a) for a, b in zip(q, q[1:]))
    return sum(q) - REBUF_PENALTY * sum(rebuffers) - smooth


def _clamp_level(value: float, dim: int) -> int:
    return max(0, min(int(math.floor(value)), dim - 1))


def simulate_abr(policy: Callable[[AbrObservation], float], trace: BandwidthTrace,
                 manifest: VideoManifest, startup_level: Optional[int] = -1,
                 record: bool = True, model: Optional[TraceModel] = None) -> AbrEpisode:
    """Play ``manifest`` over ``trace`` chunk by chunk.

    The first chunk is fetched at ``manifest.startup_level()`` (pass an index
    to override, or ``None`` to let the policy choose); its download time is
    the startup delay, not rebuffering. Afterwards the buffer drains while a
    chunk downloads, stalls count as rebuffer, and a completed chunk adds
    ``chunk_duration``. Above ``BUFFER_CAP`` the player idles until the
    buffer is back at the cap. Returned levels are floored and clamped.
    """
    model = model or TraceModel(trace)
    if startup_level == -1:
        startup_level = manifest.startup_level()
    L = manifest.chunk_duration
    dim = manifest.dim
    t = 0.0
    buf = 0.0
    levels: List[int] = []
    rebufs: List[float] = []
    traj: List[float] = []
    dts: List[float] = []
    speeds: List[float] = []
    triplets: List[StepTriplet] = []
    startup = 0.0
    for n in range(manifest.chunk_count):
        obs = None
        if n == 0 and startup_level is not None:
            level = startup_level
        else:
            obs = AbrObservation(
                buffer=buf,
                speed=speeds[-1] if speeds else 0.0,
                chunk_len=L,
                dim=dim,
                last_level=levels[-1] if levels else startup_level or 0,
                chunk_index=n,
                chunks_left=manifest.chunk_count - n - 1,
                last_download_time=dts[-1] if dts else 0.0,
                last_rebuffer=rebufs[-1] if rebufs else 0.0,
                bitrates=manifest.bitrates,
                past_speeds=tuple(speeds[-HISTORY:]),
                next_sizes=tuple(manifest.chunk_sizes[i][n] for i in range(dim)),
                manifest=manifest,
            )
            try:
                level = _clamp_level(policy(obs), dim)
            except EvalError as exc:
                if record:
                    triplets.append(StepTriplet(_fmt_state(obs), "error", f"policy failed: {exc}"))
                return AbrEpisode(levels, rebufs, traj, dts, startup,
                                  qoe_lin(levels, rebufs, manifest), triplets, True, str(exc))
        size = manifest.chunk_sizes[level][n]
        f = float(model.finish_times([t], [size])[0])
        dt = f - t
        if n == 0:
            startup = dt
            rebuf = 0.0
            buf = L
        else:
            rebuf = max(0.0, dt - buf)
            buf = max(buf - dt, 0.0) + L
        t = f
        if buf > BUFFER_CAP:
            t += buf - BUFFER_CAP
            buf = BUFFER_CAP
        levels.append(level)
        rebufs.append(rebuf)
        traj.append(buf)
        dts.append(dt)
        speeds.append(size * 8.0 / 1000.0 / max(dt, 1e-9))
        if record:
            state = _fmt_state(obs) if obs is not None else f"chunk=0 startup buffer=0.00s"
            triplets.append(StepTriplet(
                state,
                f"level={level} ({manifest.bitrates[level]:.0f} kbps)",
                f"download={dt:.2f}s rebuffer={rebuf:.2f}s buffer={buf:.2f}s",
            ))
    return AbrEpisode(levels, rebufs, traj, dts, startup, qoe_lin(levels, rebufs, manifest), triplets)


def _fmt_state(o: AbrObservation) -> str:
    return (f"chunk={o.chunk_index} buffer={o.buffer:.2f}s speed={o.speed:.0f}kbps "
            f"last_level={o.last_level}")


def fixed_level_policy(level: int) -> Callable[[AbrObservation], float]:
    return lambda obs: level


def scripted_policy(levels: Sequence[int]) -> Callable[[AbrObservation], float]:
    """Replays a level per chunk, indexed by ``chunk_index``."""
    return lambda obs: levels[obs.chunk_index]
