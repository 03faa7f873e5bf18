"""Input schemas that connect controller programs to environments."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Tuple


@dataclass(frozen=True)
class Binding:
    name: str
    scalars: Tuple[str, ...]
    arrays: Dict[str, int]  # array name -> maximum length
    doc: Dict[str, str]

    @property
    def max_array_len(self) -> int:
        return max(self.arrays.values(), default=0)

    def inputs(self) -> Tuple[str, ...]:
        return self.scalars + tuple(self.arrays)


ABR = Binding(
    name="abr",
    scalars=(
        "buffer",
        "speed",
        "chunk_len",
        "dim",
        "last_level",
        "chunk_index",
        "chunks_left",
        "last_download_time",
        "last_rebuffer",
    ),
    arrays={"bitrates": 16, "past_speeds": 5, "next_sizes": 16},
    doc={
        "buffer": "seconds of video currently buffered",
        "speed": "throughput measured on the last chunk download, kbit/s",
        "chunk_len": "chunk duration, seconds",
        "dim": "number of bitrate levels",
        "last_level": "level index chosen for the previous chunk",
        "chunk_index": "0-based index of the chunk being decided",
        "chunks_left": "chunks remaining after this one",
        "last_download_time": "seconds the previous chunk took to download",
        "last_rebuffer": "stall seconds incurred by the previous chunk",
        "bitrates": "bitrate ladder, kbit/s, ascending",
        "past_speeds": "throughput of up to the last 5 chunks, kbit/s, oldest first",
        "next_sizes": "size in bytes of the next chunk at every level",
    },
)

CARTPOLE = Binding(
    name="cartpole",
    scalars=("x", "x_dot", "theta", "theta_dot", "theta_int", "step"),
    arrays={},
    doc={
        "x": "cart position, m",
        "x_dot": "cart velocity, m/s",
        "theta": "pole angle, rad (positive leans right)",
        "theta_dot": "pole angular velocity, rad/s",
        "theta_int": "running integral of theta, clamped to [-10, 10]",
        "step": "steps elapsed in the episode",
    },
)

SCHED = Binding(
    name="sched-priority",
    scalars=(
        "now",
        "job_id",
        "job_arrival",
        "job_age",
        "job_total_work",
        "job_remaining_work",
        "job_attained",
        "job_executors",
        "job_stages_left",
        "stage_id",
        "stage_tasks_left",
        "stage_task_duration",
        "stage_remaining_work",
        "free_executors",
        "n_executors",
        "bound_here",
        "active_jobs",
    ),
    arrays={},
    doc={
        "now": "simulation clock, s",
        "job_id": "job index in arrival order",
        "job_arrival": "job arrival time, s",
        "job_age": "now - job_arrival",
        "job_total_work": "sum of task durations over the whole job, s",
        "job_remaining_work": "work not yet started, s",
        "job_attained": "work already executed or running, s",
        "job_executors": "executors currently running tasks of this job",
        "job_stages_left": "stages of the job not yet finished",
        "stage_id": "stage index within the job",
        "stage_tasks_left": "unlaunched tasks in this stage",
        "stage_task_duration": "nominal duration of one task of this stage, s",
        "stage_remaining_work": "stage_tasks_left * stage_task_duration",
        "free_executors": "executors idle at this decision",
        "n_executors": "cluster size",
        "bound_here": "1 if the executor being assigned last ran this job",
        "active_jobs": "jobs arrived and not finished",
    },
)

BINDINGS: Dict[str, Binding] = {b.name: b for b in (ABR, CARTPOLE, SCHED)}

# environment domain -> binding name
DOMAIN_BINDING = {"abr": "abr", "cartpole": "cartpole", "sched": "sched-priority"}


def get_binding(name: str) -> Binding:
    try:
        return BINDINGS[name]
    except KeyError:
        raise ValueError(f"unknown binding {name!r}; expected one of {sorted(BINDINGS)}") from None
