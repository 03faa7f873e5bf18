"""Score an algorithm on an environment, and build environments from names."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Tuple

from .abr import VideoManifest, fixed_level_policy, load_manifest, simulate_abr
from .cartpole import MAX_STEPS, run_cartpole
from .core import CaseResult, EnvironmentDescriptor, EvalResult
from .sched import SchedWorkload, generate_sched_workload, load_workload, simulate_sched
from .traces import PROFILES, BandwidthTrace, TraceModel, generate_profile, load_trace

SYNTH_TRACE_COUNT = 20
CARTPOLE_SEEDS = tuple(range(20))
FAILED_ABR_MARGIN = 1.0


@dataclass(frozen=True)
class AbrPayload:
    traces: Tuple[BandwidthTrace, ...]
    manifest: VideoManifest = VideoManifest()


@dataclass(frozen=True)
class SchedPayload:
    workloads: Tuple[SchedWorkload, ...]
    n_executors: int = 10
    phenomena: bool = True
    wave_factor: float = 1.3


# name -> (jobs per workload, executors, mean interarrival, task scale)
SCHED_PRESETS: Dict[str, Tuple[int, int, float, float]] = {
    "light": (8, 12, 8.0, 2.0),
    "medium": (15, 10, 5.0, 2.0),
    "heavy": (30, 8, 2.5, 2.0),
}
SCHED_WORKLOADS = 5


def name_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary labels (independent of PYTHONHASHSEED)."""
    digest = hashlib.sha256("/".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def abr_failure_score(trace: BandwidthTrace, manifest: VideoManifest) -> float:
    """Per-chunk QoE of always playing the lowest level, minus a fixed margin."""
    return _lowest_level_score(trace, manifest) - FAILED_ABR_MARGIN


@lru_cache(maxsize=4096)
def _lowest_level_score(trace: BandwidthTrace, manifest: VideoManifest) -> float:
    ep = simulate_abr(fixed_level_policy(0), trace, manifest, startup_level=0, record=False)
    return ep.qoe / manifest.chunk_count


@lru_cache(maxsize=4096)
def _trace_model(trace: BandwidthTrace) -> TraceModel:
    return TraceModel(trace)


def evaluate_env(controller, env: EnvironmentDescriptor, seed: int = 0, record: bool = True) -> EvalResult:
    """Run ``controller`` on every case of ``env`` and average the case scores.

    Case scores: per-chunk QoE_lin (abr), steps survived (cartpole), and
    -mean job completion time (sched). A policy that errors scores the
    domain sentinel for that case. The simulators are deterministic, so
    ``seed`` only labels the run.
    """
    if controller.domain != env.domain:
        raise ValueError(f"{controller.name} is a {controller.domain} algorithm, {env.name} is {env.domain}")
    cases: List[CaseResult] = []
    if env.domain == "abr":
        m = env.payload.manifest
        for trace in env.payload.traces:
            ep = simulate_abr(controller.make_policy(), trace, m, record=record, model=_trace_model(trace))
            score = abr_failure_score(trace, m) if ep.failed else ep.qoe / m.chunk_count
            cases.append(CaseResult(trace.name, score, ep.triplets, ep.failed))
    elif env.domain == "cartpole":
        for s in env.payload:
            ep = run_cartpole(controller.make_policy(), s, MAX_STEPS, record=record)
            cases.append(CaseResult(f"seed-{s}", 0.0 if ep.failed else float(ep.steps), ep.triplets, ep.failed))
    else:
        p = env.payload
        for w in p.workloads:
            r = simulate_sched(controller.make_policy(), w, p.n_executors, phenomena=p.phenomena,
                               wave_factor=p.wave_factor, record=record)
            cases.append(CaseResult(w.name, -r.avg_jct, r.triplets, r.fallbacks > 0))
    score = sum(c.score for c in cases) / len(cases)
    return EvalResult(env.name, score, cases)


class EnvSpecError(ValueError):
    pass


def resolve_env(spec: str, trace_count: int = SYNTH_TRACE_COUNT) -> EnvironmentDescriptor:
    """Build an environment from ``domain:detail``.

    * ``abr:<profile>-synth`` synthetic traces for 3g, oboe, fcc or puffer;
      ``abr:<dir>`` loads every trace file in a directory (plus
      ``manifest.json`` when present).
    * ``cartpole:v1`` the 20 seeds 0..19; ``cartpole:seeds=a,b,...`` explicit seeds.
    * ``sched:light|medium|heavy`` generated workload sets; ``sched:<path>``
      a workload JSON file or a directory of them.

    Synthetic data is seeded from the spec string, so a name always denotes
    the same environment.
    """
    domain, sep, detail = spec.partition(":")
    if not sep or not detail:
        raise EnvSpecError(f"environment spec {spec!r} must look like domain:detail")
    if domain == "abr":
        if detail.endswith("-synth") and detail[:-6] in PROFILES:
            prof = detail[:-6]
            traces = generate_profile(prof, name_seed("abr", prof), trace_count)
            return EnvironmentDescriptor("abr", spec, AbrPayload(tuple(traces)))
        path = Path(detail)
        if path.is_dir():
            man = path / "manifest.json"
            manifest = load_manifest(man) if man.exists() else VideoManifest()
            files = [p for p in sorted(path.iterdir()) if p.is_file() and p.name != "manifest.json"
                     and not p.name.startswith(".")]
            traces = tuple(load_trace(p) for p in files)
            if not traces:
                raise EnvSpecError(f"no trace files in {path}")
            return EnvironmentDescriptor("abr", spec, AbrPayload(traces, manifest))
        raise EnvSpecError(f"unknown abr environment {detail!r} (profiles: "
                           + ", ".join(f"{p}-synth" for p in PROFILES) + ", or a trace directory)")
    if domain == "cartpole":
        if detail == "v1":
            return EnvironmentDescriptor("cartpole", spec, CARTPOLE_SEEDS)
        if detail.startswith("seeds="):
            try:
                seeds = tuple(int(s) for s in detail[6:].split(",") if s)
            except ValueError:
                raise EnvSpecError(f"bad seed list in {spec!r}") from None
            return EnvironmentDescriptor("cartpole", spec, seeds)
        raise EnvSpecError(f"unknown cartpole environment {detail!r} (use v1 or seeds=...)")
    if domain == "sched":
        if detail in SCHED_PRESETS:
            n_jobs, n_exec, gap, scale = SCHED_PRESETS[detail]
            wls = tuple(generate_sched_workload(name_seed("sched", detail, i), n_jobs, scale,
                                                interarrival=gap / scale, name=f"{detail}-{i:02d}")
                        for i in range(SCHED_WORKLOADS))
            return EnvironmentDescriptor("sched", spec, SchedPayload(wls, n_exec))
        path = Path(detail)
        if path.is_file():
            return EnvironmentDescriptor("sched", spec, SchedPayload((load_workload(path),)))
        if path.is_dir():
            wls = tuple(load_workload(p) for p in sorted(path.glob("*.json")))
            if not wls:
                raise EnvSpecError(f"no workload files in {path}")
            return EnvironmentDescriptor("sched", spec, SchedPayload(wls))
        raise EnvSpecError(f"unknown sched environment {detail!r} (presets: {', '.join(SCHED_PRESETS)})")
    raise EnvSpecError(f"unknown domain {domain!r} in {spec!r}")


def builtin_env_specs() -> List[str]:
    return ([f"abr:{p}-synth" for p in PROFILES] + ["cartpole:v1"]
            + [f"sched:{p}" for p in SCHED_PRESETS])
