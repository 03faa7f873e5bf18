"""Discrete-event simulator for DAG jobs sharing a pool of executors.

Each stage holds ``task_count`` identical tasks; a stage becomes ready when
its job has arrived and all parent stages have finished. Whenever executors
are free, each one (lowest id first) is handed a task from the ready stage
the policy ranks highest. Two cluster effects are modelled and can be turned
off together with ``phenomena=False``:

* tasks launched before any task of their stage has finished (the first
  wave) run ``wave_factor`` times longer;
* an executor that last ran a task of another job pays a startup delay drawn
  uniformly from ``delay_range`` before its new task starts. The delay is
  not counted as busy time.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..dsl.errors import EvalError
from .core import StepTriplet


@dataclass(frozen=True)
class Stage:
    task_count: int
    task_duration: float  # seconds per task
    parents: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.task_count < 1:
            raise ValueError("task_count must be >= 1")
        if not (self.task_duration > 0 and math.isfinite(self.task_duration)):
            raise ValueError("task_duration must be positive and finite")
        object.__setattr__(self, "parents", tuple(int(p) for p in self.parents))

    @property
    def work(self) -> float:
        return self.task_count * self.task_duration


@dataclass(frozen=True)
class Job:
    arrival: float
    stages: Tuple[Stage, ...]

    def __post_init__(self):
        if not self.stages:
            raise ValueError("a job needs at least one stage")
        if not (self.arrival >= 0 and math.isfinite(self.arrival)):
            raise ValueError("arrival must be a finite non-negative time")
        object.__setattr__(self, "stages", tuple(self.stages))
        n = len(self.stages)
        for i, s in enumerate(self.stages):
            for p in s.parents:
                if not 0 <= p < n or p == i:
                    raise ValueError(f"stage {i} has invalid parent {p}")
        _topological_order(self.stages)

    @property
    def total_work(self) -> float:
        return sum(s.work for s in self.stages)


def _topological_order(stages: Sequence[Stage]) -> List[int]:
    indeg = [len(set(s.parents)) for s in stages]
    children: Dict[int, List[int]] = {i: [] for i in range(len(stages))}
    for i, s in enumerate(stages):
        for p in set(s.parents):
            children[p].append(i)
    ready = [i for i, d in enumerate(indeg) if d == 0]
    order = []
    while ready:
        i = ready.pop()
        order.append(i)
        for c in children[i]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    if len(order) != len(stages):
        raise ValueError("stage dependency graph has a cycle")
    return order


@dataclass(frozen=True)
class SchedWorkload:
    jobs: Tuple[Job, ...]
    name: str = "workload"
    seed: int = 0  # drives executor startup delays

    def __post_init__(self):
        if not self.jobs:
            raise ValueError("workload has no jobs")
        object.__setattr__(self, "jobs", tuple(self.jobs))

    @property
    def total_work(self) -> float:
        return sum(j.total_work for j in self.jobs)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "jobs": [
                {"arrival": j.arrival,
                 "stages": [{"tasks": s.task_count, "duration_s": s.task_duration,
                             "parents": list(s.parents)} for s in j.stages]}
                for j in self.jobs
            ],
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def workload_from_dict(data: dict, name: Optional[str] = None) -> SchedWorkload:
    try:
        jobs = tuple(
            Job(float(j.get("arrival", 0.0)),
                tuple(Stage(int(s["tasks"]), float(s["duration_s"]), tuple(s.get("parents", ())))
                      for s in j["stages"]))
            for j in data["jobs"]
        )
    except KeyError as exc:
        raise ValueError(f"workload missing key {exc}") from None
    return SchedWorkload(jobs, name or data.get("name", "workload"), int(data.get("seed", 0)))


def load_workload(path) -> SchedWorkload:
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    return workload_from_dict(data, data.get("name", path.stem))


def save_workload(workload: SchedWorkload, path) -> None:
    Path(path).write_text(json.dumps(workload.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def generate_sched_workload(seed: int, n_jobs: int, scale: float = 1.0,
                            interarrival: float = 5.0, name: Optional[str] = None) -> SchedWorkload:
    """Random layered DAG jobs with Poisson arrivals.

    Every job has 2-6 stages spread over layers; each stage past the first
    layer depends on one or two stages of the previous layer. Task durations
    are lognormal(0, 0.5) times ``scale`` seconds and task counts are 1-8.
    The first job arrives at t=0, later gaps are exponential with mean
    ``interarrival * scale``.
    """
    if n_jobs < 1:
        raise ValueError("n_jobs must be >= 1")
    if scale <= 0:
        raise ValueError("scale must be positive")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    jobs = []
    t = 0.0
    for j in range(n_jobs):
        if j > 0:
            t += float(rng.exponential(interarrival * scale))
        n_stages = int(rng.integers(2, 7))
        n_layers = int(rng.integers(2, n_stages + 1))
        # every layer gets one stage, the rest land on random layers
        layer_of = sorted(list(range(n_layers)) + list(rng.integers(0, n_layers, n_stages - n_layers)))
        stages = []
        for i, layer in enumerate(layer_of):
            parents: Tuple[int, ...] = ()
            if layer > 0:
                prev = [k for k in range(i) if layer_of[k] == layer - 1]
                k = min(len(prev), int(rng.integers(1, 3)))
                parents = tuple(sorted(int(p) for p in rng.choice(prev, size=k, replace=False)))
            count = int(rng.integers(1, 9))
            dur = round(float(scale * rng.lognormal(0.0, 0.5)), 6)
            stages.append(Stage(count, max(dur, 1e-6), parents))
        jobs.append(Job(round(t, 6), tuple(stages)))
    return SchedWorkload(tuple(jobs), name or f"sched-{seed}", seed)


@dataclass(frozen=True)
class SchedCandidate:
    """A ready stage as seen by one free executor."""

    job_id: int
    stage_id: int
    now: float
    job_arrival: float
    job_total_work: float
    job_remaining_work: float
    job_attained: float
    job_executors: int
    job_stages_left: int
    stage_tasks_left: int
    stage_task_duration: float
    free_executors: int
    n_executors: int
    bound_here: bool
    active_jobs: int

    def inputs(self) -> dict:
        """Inputs for the ``sched-priority`` controller binding."""
        return {
            "now": self.now,
            "job_id": float(self.job_id),
            "job_arrival": self.job_arrival,
            "job_age": self.now - self.job_arrival,
            "job_total_work": self.job_total_work,
            "job_remaining_work": self.job_remaining_work,
            "job_attained": self.job_attained,
            "job_executors": float(self.job_executors),
            "job_stages_left": float(self.job_stages_left),
            "stage_id": float(self.stage_id),
            "stage_tasks_left": float(self.stage_tasks_left),
            "stage_task_duration": self.stage_task_duration,
            "stage_remaining_work": self.stage_tasks_left * self.stage_task_duration,
            "free_executors": float(self.free_executors),
            "n_executors": float(self.n_executors),
            "bound_here": 1.0 if self.bound_here else 0.0,
            "active_jobs": float(self.active_jobs),
        }


# A policy maps (candidates, executor id) to the index of the chosen candidate.
# ``reset`` (optional) is called once before a run.
SchedPolicy = Callable[[Sequence[SchedCandidate], int], int]


def fifo_choice(candidates: Sequence[SchedCandidate]) -> int:
    return min(range(len(candidates)),
               key=lambda i: (candidates[i].job_arrival, candidates[i].job_id, candidates[i].stage_id))


def priority_policy(priority: Callable[[SchedCandidate], float]) -> SchedPolicy:
    """Pick the candidate with the highest priority; ties go to the earliest listed."""

    def choose(candidates, executor):
        best, best_p = 0, -math.inf
        for i, c in enumerate(candidates):
            p = priority(c)
            if p > best_p:
                best, best_p = i, p
        return best

    return choose


@dataclass(frozen=True)
class TaskRecord:
    job_id: int
    stage_id: int
    executor: int
    launch: float  # executor assigned
    start: float  # after any startup delay
    end: float
    first_wave: bool


@dataclass
class SchedResult:
    completion: List[float]
    arrival: List[float]
    avg_jct: float
    utilization: float
    cumulative_waiting: float
    makespan: float
    busy_time: float
    n_executors: int
    tasks: List[TaskRecord] = field(default_factory=list)
    triplets: List[StepTriplet] = field(default_factory=list)
    fallbacks: int = 0

    @property
    def jct(self) -> List[float]:
        return [c - a for c, a in zip(self.completion, self.arrival)]


class _StageState:
    __slots__ = ("ready_at", "launched", "finished", "done")

    def __init__(self):
        self.ready_at: Optional[float] = None
        self.launched = 0
        self.finished = 0
        self.done = False


def simulate_sched(policy: SchedPolicy, workload: SchedWorkload, n_executors: int,
                   phenomena: bool = True, wave_factor: float = 1.3,
                   delay_range: Tuple[float, float] = (2.0, 3.0), record: bool = True) -> SchedResult:
    """Run ``workload`` on ``n_executors`` executors under ``policy``.

    If the policy raises ``EvalError`` or returns an out-of-range index, that
    decision falls back to FIFO and the failure is recorded as a triplet.
    """
    if n_executors < 1:
        raise ValueError("n_executors must be >= 1")
    reset = getattr(policy, "reset", None)
    if reset is not None:
        reset()
    delay_rng = np.random.default_rng(np.random.SeedSequence(workload.seed, spawn_key=(7,)))
    jobs = workload.jobs
    stages = [[_StageState() for _ in j.stages] for j in jobs]
    children = [[[c for c, s in enumerate(j.stages) if p in s.parents] for p in range(len(j.stages))]
                for j in jobs]
    arrived = [False] * len(jobs)
    completion: List[Optional[float]] = [None] * len(jobs)
    remaining = [j.total_work for j in jobs]
    attained = [0.0] * len(jobs)
    running = [0] * len(jobs)
    stages_left = [len(j.stages) for j in jobs]
    exec_free = [True] * n_executors
    exec_job: List[Optional[int]] = [None] * n_executors
    tasks: List[TaskRecord] = []
    triplets: List[StepTriplet] = []
    waiting = 0.0
    busy = 0.0
    fallbacks = 0

    events: list = []  # (time, kind, seq, payload); kind 0 = finish, 1 = arrival
    seq = 0
    for j, job in enumerate(jobs):
        heapq.heappush(events, (job.arrival, 1, seq, j))
        seq += 1

    def mark_ready(j, s, now):
        stages[j][s].ready_at = now

    while events:
        now = events[0][0]
        while events and events[0][0] == now:
            _, kind, _, payload = heapq.heappop(events)
            if kind == 1:
                j = payload
                arrived[j] = True
                for s, st in enumerate(jobs[j].stages):
                    if not st.parents:
                        mark_ready(j, s, now)
            else:
                e, j, s = payload
                exec_free[e] = True
                running[j] -= 1
                st = stages[j][s]
                st.finished += 1
                if st.finished == jobs[j].stages[s].task_count:
                    st.done = True
                    stages_left[j] -= 1
                    for c in children[j][s]:
                        if all(stages[j][p].done for p in jobs[j].stages[c].parents):
                            mark_ready(j, c, now)
                    if stages_left[j] == 0:
                        completion[j] = now

        for e in range(n_executors):
            if not exec_free[e]:
                continue
            ready = [(j, s) for j in range(len(jobs)) if arrived[j] and completion[j] is None
                     for s, st in enumerate(stages[j])
                     if st.ready_at is not None and st.launched < jobs[j].stages[s].task_count]
            if not ready:
                break
            free = sum(exec_free)
            active = sum(1 for j in range(len(jobs)) if arrived[j] and completion[j] is None)
            cands = [SchedCandidate(
                job_id=j, stage_id=s, now=now, job_arrival=jobs[j].arrival,
                job_total_work=jobs[j].total_work, job_remaining_work=remaining[j],
                job_attained=attained[j], job_executors=running[j], job_stages_left=stages_left[j],
                stage_tasks_left=jobs[j].stages[s].task_count - stages[j][s].launched,
                stage_task_duration=jobs[j].stages[s].task_duration,
                free_executors=free, n_executors=n_executors,
                bound_here=exec_job[e] == j, active_jobs=active,
            ) for j, s in ready]
            note = ""
            try:
                pick = policy(cands, e)
                problem = (None if isinstance(pick, (int, np.integer)) and 0 <= pick < len(cands)
                           else f"invalid choice {pick!r}")
            except EvalError as exc:
                problem = str(exc)
            if problem is not None:
                pick = fifo_choice(cands)
                fallbacks += 1
                note = f"policy failed ({problem}); FIFO fallback; "
            c = cands[pick]
            j, s = c.job_id, c.stage_id
            spec = jobs[j].stages[s]
            st = stages[j][s]
            first = st.finished == 0
            dur = spec.task_duration * (wave_factor if (phenomena and first) else 1.0)
            delay = 0.0
            if phenomena and exec_job[e] is not None and exec_job[e] != j:
                delay = float(delay_rng.uniform(*delay_range))
            start = now + delay
            end = start + dur
            st.launched += 1
            remaining[j] -= spec.task_duration
            attained[j] += spec.task_duration
            running[j] += 1
            exec_free[e] = False
            exec_job[e] = j
            waiting += now - st.ready_at
            busy += dur
            tasks.append(TaskRecord(j, s, e, now, start, end, first))
            heapq.heappush(events, (end, 0, seq, (e, j, s)))
            seq += 1
            if record:
                queue = ", ".join(f"j{x.job_id}s{x.stage_id}({x.stage_tasks_left} left)" for x in cands)
                extra = (" first wave" if first and phenomena else "") + (
                    f" +{delay:.2f}s startup" if delay else "")
                triplets.append(StepTriplet(
                    f"t={now:.2f} executor={e} free={c.free_executors} ready=[{queue}]",
                    f"run j{j}s{s}",
                    note + f"task {dur:.2f}s{extra}, ends t={end:.2f}",
                ))

    done = [float(c) for c in completion]
    arrivals = [j.arrival for j in jobs]
    makespan = max(done)
    jct = [c - a for c, a in zip(done, arrivals)]
    util = busy / (n_executors * makespan) if makespan > 0 else 0.0
    return SchedResult(done, arrivals, float(np.mean(jct)), min(util, 1.0), waiting, makespan, busy,
                       n_executors, tasks, triplets, fallbacks)

