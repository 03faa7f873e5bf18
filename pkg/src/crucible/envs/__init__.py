"""Simulators and scorers for the abr, cartpole and sched domains."""

from .abr import AbrEpisode, VideoManifest, load_manifest, qoe_lin, simulate_abr
from .cartpole import CartPoleState, simulate_cartpole
from .core import CaseResult, EnvironmentDescriptor, EvalResult, StepTriplet
from .evaluate import AbrPayload, EnvSpecError, SchedPayload, builtin_env_specs, evaluate_env, resolve_env
from .oracle import offline_optimal_abr
from .sched import SchedResult, SchedWorkload, generate_sched_workload, load_workload, simulate_sched
from .traces import BandwidthTrace, generate_traces, load_trace

__all__ = [
    "AbrEpisode",
    "AbrPayload",
    "BandwidthTrace",
    "CartPoleState",
    "CaseResult",
    "EnvSpecError",
    "EnvironmentDescriptor",
    "EvalResult",
    "SchedPayload",
    "SchedResult",
    "SchedWorkload",
    "StepTriplet",
    "VideoManifest",
    "builtin_env_specs",
    "evaluate_env",
    "generate_sched_workload",
    "generate_traces",
    "load_manifest",
    "load_trace",
    "load_workload",
    "offline_optimal_abr",
    "qoe_lin",
    "resolve_env",
    "simulate_abr",
    "simulate_cartpole",
    "simulate_sched",
]
