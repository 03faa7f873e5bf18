import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crucible.algorithms import get_controller
from crucible.algorithms.sched_native import FairScheduler, RoundRobinScheduler
from crucible.dsl import EvalError
from crucible.envs.sched import (Job, SchedCandidate, SchedWorkload, Stage, fifo_choice, generate_sched_workload,
                                 load_workload, priority_policy, save_workload, simulate_sched, workload_from_dict)


def two_jobs():
    return SchedWorkload((Job(0.0, (Stage(1, 4.0),)), Job(0.0, (Stage(1, 2.0),))), "pair", 0)


def policy(name):
    return get_controller(name).make_policy()


# ---- hand schedules ------------------------------------------------------

def test_fifo_hand_schedule():
    r = simulate_sched(policy("fifo"), two_jobs(), 1, phenomena=False)
    assert r.completion == [4.0, 6.0] and r.avg_jct == 5.0


def test_sjf_hand_schedule():
    r = simulate_sched(policy("sjf"), two_jobs(), 1, phenomena=False)
    assert sorted(r.completion) == [2.0, 6.0] and r.avg_jct == 4.0
    assert r.completion == [6.0, 2.0]


def test_fifo_choice_helper():
    r = simulate_sched(lambda c, e: fifo_choice(c), two_jobs(), 1, phenomena=False)
    assert r.completion == [4.0, 6.0]


def test_phenomena_inflate_first_wave_and_add_move_delay():
    w = SchedWorkload((Job(0.0, (Stage(2, 1.0),)), Job(0.0, (Stage(1, 1.0),))), "w", 5)
    r = simulate_sched(policy("fifo"), w, 1)
    t0, t1, t2 = r.tasks
    assert t0.first_wave and t0.end - t0.start == pytest.approx(1.3)
    assert not t1.first_wave and t1.end - t1.start == pytest.approx(1.0)
    # moving to job 1 costs a startup delay; its stage has finished nothing, so first wave too
    assert 2.0 <= t2.start - t2.launch <= 3.0 and t2.end - t2.start == pytest.approx(1.3)


# ---- workloads -----------------------------------------------------------

def test_workload_validation():
    with pytest.raises(ValueError):
        Stage(1, 0.0)
    with pytest.raises(ValueError):
        Job(0.0, (Stage(1, 1.0, (1,)), Stage(1, 1.0, (0,))))  # cycle
    with pytest.raises(ValueError):
        Job(0.0, (Stage(1, 1.0, (5,)),))


def test_generator_determinism_and_digest():
    a = generate_sched_workload(3, 6)
    b = generate_sched_workload(3, 6)
    assert a.to_dict() == b.to_dict() and a.digest() == b.digest()
    assert generate_sched_workload(4, 6).digest() != a.digest()


def test_single_job_workload():
    w = generate_sched_workload(0, 1)
    assert len(w.jobs) == 1 and 2 <= len(w.jobs[0].stages) <= 6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 8))
def test_total_work_is_definitional(seed, n):
    w = generate_sched_workload(seed, n)
    assert w.total_work == pytest.approx(sum(s.task_count * s.task_duration for j in w.jobs for s in j.stages))
    for j in w.jobs:
        assert 2 <= len(j.stages) <= 6
        assert all(p < i for i, s in enumerate(j.stages) for p in s.parents)


def test_workload_file_round_trip(tmp_path):
    w = generate_sched_workload(9, 4, name="nine")
    save_workload(w, tmp_path / "w.json")
    data = json.loads((tmp_path / "w.json").read_text())
    assert set(data["jobs"][0]["stages"][0]) == {"tasks", "duration_s", "parents"}
    assert load_workload(tmp_path / "w.json").to_dict() == w.to_dict()
    assert workload_from_dict(data).digest() == w.digest()


# ---- invariants on random workloads ---------------------------------------

def check_schedule(w, r, phenomena=True, wave=1.3):
    jobs = w.jobs
    assert len(r.tasks) == sum(s.task_count for j in jobs for s in j.stages)
    # executors never overlap, durations honour the wave factor, delays are 0 or in [2, 3]
    by_exec = {}
    for t in r.tasks:
        by_exec.setdefault(t.executor, []).append(t)
        base = jobs[t.job_id].stages[t.stage_id].task_duration
        assert t.end - t.start == pytest.approx(base * (wave if phenomena and t.first_wave else 1.0))
        d = t.start - t.launch
        assert d == 0.0 or (phenomena and 2.0 <= d <= 3.0)
        assert t.launch >= jobs[t.job_id].arrival
    for ts in by_exec.values():
        ts.sort(key=lambda t: t.launch)
        for a, b in zip(ts, ts[1:]):
            assert b.launch >= a.end - 1e-9
    # stage precedence
    stage_end = {}
    stage_start = {}
    for t in r.tasks:
        k = (t.job_id, t.stage_id)
        stage_end[k] = max(stage_end.get(k, 0.0), t.end)
        stage_start[k] = min(stage_start.get(k, np.inf), t.launch)
    for j, job in enumerate(jobs):
        for s, stg in enumerate(job.stages):
            for p in stg.parents:
                assert stage_start[(j, s)] >= stage_end[(j, p)] - 1e-9
        assert r.completion[j] == pytest.approx(max(stage_end[(j, s)] for s in range(len(job.stages))))
        assert r.completion[j] >= job.arrival
    # busy-time conservation and utilization
    executed = sum(t.end - t.start for t in r.tasks)
    assert r.busy_time == pytest.approx(executed)
    assert r.utilization == pytest.approx(r.busy_time / (r.n_executors * r.makespan))
    assert 0.0 <= r.utilization <= 1.0
    assert r.avg_jct == pytest.approx(np.mean([c - j.arrival for c, j in zip(r.completion, jobs)]))


@pytest.mark.parametrize("name", ["fifo", "sjf", "srtf", "mlf", "tetris_like", "fair", "round_robin"])
@pytest.mark.parametrize("phenomena", [True, False])
def test_schedule_invariants(name, phenomena):
    for seed in range(6):
        w = generate_sched_workload(seed, 6, interarrival=3.0)
        r = simulate_sched(policy(name), w, 4, phenomena=phenomena)
        check_schedule(w, r, phenomena)
        assert r.fallbacks == 0


def test_more_executors_lower_utilization_on_saturated_load():
    for seed in range(10):
        w = generate_sched_workload(seed, 12, interarrival=0.5)
        lo = simulate_sched(policy("fifo"), w, 3).utilization
        hi = simulate_sched(policy("fifo"), w, 6).utilization
        assert lo >= hi


def test_simulator_is_deterministic():
    w = generate_sched_workload(2, 8)
    a = simulate_sched(policy("mlf"), w, 3)
    b = simulate_sched(policy("mlf"), w, 3)
    assert a.tasks == b.tasks and [t.line() for t in a.triplets] == [t.line() for t in b.triplets]


# ---- policies ------------------------------------------------------------

def _cand(job_id, total, arrival=0.0, stage_id=0, **kw):
    base = dict(job_id=job_id, stage_id=stage_id, now=10.0, job_arrival=arrival, job_total_work=total,
                job_remaining_work=total, job_attained=0.0, job_executors=0, job_stages_left=1,
                stage_tasks_left=1, stage_task_duration=1.0, free_executors=1, n_executors=2,
                bound_here=False, active_jobs=3)
    base.update(kw)
    return SchedCandidate(**base)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.1, 100.0), min_size=1, max_size=10))
def test_sjf_picks_smallest_total_work(works):
    cands = [_cand(i, w) for i, w in enumerate(works)]
    pick = policy("sjf")(cands, 0)
    assert pick == min(range(len(works)), key=lambda i: (works[i], i))


def test_sjf_single_executor_order_is_ascending_work():
    rng = np.random.default_rng(0)
    for _ in range(10):
        durs = rng.uniform(0.5, 10, size=6)
        w = SchedWorkload(tuple(Job(0.0, (Stage(1, float(d)),)) for d in durs), "s", 0)
        r = simulate_sched(policy("sjf"), w, 1, phenomena=False)
        assert list(np.argsort(r.completion, kind="stable")) == list(np.argsort(durs, kind="stable"))


def test_policy_errors_fall_back_to_fifo():
    def broken(c, e):
        raise EvalError("division-by-zero", "boom")
    r = simulate_sched(broken, two_jobs(), 1, phenomena=False)
    assert r.fallbacks == 2 and r.completion == [4.0, 6.0]
    assert "FIFO fallback" in r.triplets[0].outcome
    r = simulate_sched(lambda c, e: 99, two_jobs(), 1, phenomena=False)
    assert r.fallbacks == 2 and r.completion == [4.0, 6.0]


def test_priority_policy_ties_go_first():
    pol = priority_policy(lambda c: 1.0)
    assert pol([_cand(0, 1.0), _cand(1, 1.0)], 0) == 0


def test_fair_prefers_fewest_executors():
    cands = [_cand(0, 5.0, job_executors=2), _cand(1, 5.0, job_executors=0)]
    assert FairScheduler()(cands, 0) == 1


def test_round_robin_cycles_and_resets():
    rr = RoundRobinScheduler()
    cands = [_cand(0, 1.0), _cand(1, 1.0), _cand(2, 1.0)]
    assert [rr(cands, 0) for _ in range(4)] == [0, 1, 2, 0]
    rr.reset()
    assert rr(cands, 0) == 0
