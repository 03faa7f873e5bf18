"""The tuning loop: evaluate, optimize parameters, ask for logic patches, keep improvements.

Per environment:

1. score the algorithm as shipped (``score_init``);
2. optimize its parameters with ``n_bayes`` evaluations (skipped when 0);
3. ``n_reflect`` times: compare against a reference to collect bad cases,
   build a prompt, ask the advisor for a patch, parse it, optimize the
   patched program's parameters, and keep it only if it scores strictly
   higher than the incumbent.

Everything is written to a session directory as it happens.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .advisor import (DOMAIN_BUNDLES, BadCase, HistoryTriplet, PromptBundle, build_prompt,
                      make_advisor, select_bad_cases)
from .algorithms import get, get_controller, list_algorithms
from .algorithms.controllers import DslController
from .bayesopt import SearchSpace, optimize
from .dsl import GRAMMAR, ParamDecl, ParseError
from .envs.core import EnvironmentDescriptor, EvalResult
from .envs.evaluate import evaluate_env, name_seed, resolve_env
from .envs.oracle import offline_optimal_abr

log = logging.getLogger(__name__)

EXCERPT_LINES = 6
REFERENCES = ("auto", "offline-optimal", "best-of-builtins", "constant")
DEFAULT_REFERENCE = {"abr": "offline-optimal", "cartpole": "constant:500", "sched": "best-of-builtins"}


def derive_seed(master: int, *labels) -> int:
    """Independent seed for one use of the master seed, stable across processes."""
    return name_seed(master, *labels)


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name).strip("_") or "env"


class EvalCounter:
    """Counts environment evaluations by purpose."""

    def __init__(self):
        self.counts = {"objective": 0, "comparison": 0, "reference": 0}

    def run(self, controller, env, purpose: str, record: bool = False) -> EvalResult:
        self.counts[purpose] += 1
        return evaluate_env(controller, env, record=record)

    @property
    def total(self) -> int:
        return sum(self.counts.values())


# ---------------------------------------------------------------- references

@lru_cache(maxsize=64)
def _oracle_scores(env: EnvironmentDescriptor) -> Tuple[Tuple[str, float], ...]:
    m = env.payload.manifest
    return tuple((t.name, offline_optimal_abr(t, m).qoe / m.chunk_count) for t in env.payload.traces)


@lru_cache(maxsize=64)
def _best_builtin_scores(env: EnvironmentDescriptor) -> Tuple[Tuple[str, float], ...]:
    best: Dict[str, float] = {}
    for name in list_algorithms(env.domain):
        r = evaluate_env(get_controller(name), env, record=False)
        for c in r.cases:
            best[c.case_id] = max(best.get(c.case_id, -np.inf), c.score)
    return tuple((cid, best[cid]) for cid in env.cases())


def reference_scores(reference: str, env: EnvironmentDescriptor) -> Dict[str, float]:
    """Per-case reference scores: ``offline-optimal`` (abr), ``best-of-builtins``, or ``constant:<v>``."""
    if reference == "auto":
        reference = DEFAULT_REFERENCE[env.domain]
    if reference == "offline-optimal":
        if env.domain != "abr":
            raise ValueError("the offline-optimal reference exists only for abr")
        return dict(_oracle_scores(env))
    if reference == "best-of-builtins":
        return dict(_best_builtin_scores(env))
    if reference.startswith("constant:"):
        value = float(reference.split(":", 1)[1])
        return {cid: value for cid in env.cases()}
    raise ValueError(f"unknown reference {reference!r}")


def _excerpt(triplets) -> str:
    if not triplets:
        return ""
    idx = sorted(set(np.linspace(0, len(triplets) - 1, min(EXCERPT_LINES, len(triplets))).round().astype(int)))
    return "\n".join(triplets[i].line() for i in idx)


def compare_algs(current_result: EvalResult, reference: Dict[str, float], env_name: str) -> List[BadCase]:
    """Bad cases of an evaluated algorithm against per-case reference scores (top 5, gap > 5%)."""
    cases = [BadCase(env_name, c.case_id, c.score, reference[c.case_id], _excerpt(c.triplets))
             for c in current_result.cases]
    return select_bad_cases(cases)


# ---------------------------------------------------------------- sessions

@dataclass
class SessionConfig:
    algorithm: str
    envs: Tuple[str, ...]
    n_reflect: int = 1
    n_bayes: int = 10
    advisor: str = "null"
    advisor_settings: Dict[str, str] = field(default_factory=dict)
    reference: str = "auto"
    seed: int = 0
    out_dir: Optional[str] = None
    bundle: Optional[PromptBundle] = None

    def __post_init__(self):
        self.envs = tuple(self.envs)
        if not self.envs:
            raise ValueError("a session needs at least one environment")
        if self.n_reflect < 0 or self.n_bayes < 0:
            raise ValueError("budgets must be >= 0")
        if not (self.reference in REFERENCES or self.reference.startswith("constant:")):
            raise ValueError(f"unknown reference {self.reference!r}")

    def to_dict(self) -> dict:
        # out_dir is deliberately left out so identical sessions are identical on disk
        return {"algorithm": self.algorithm, "envs": list(self.envs), "n_reflect": self.n_reflect,
                "n_bayes": self.n_bayes, "advisor": self.advisor,
                "advisor_settings": {k: v for k, v in sorted(self.advisor_settings.items())
                                     if "key" not in k.lower()},
                "reference": self.reference, "seed": self.seed}


@dataclass
class SessionState:
    env: str
    controller: object
    score_init: float
    score_cur: float
    history: List[HistoryTriplet] = field(default_factory=list)
    bad_cases: Dict[Tuple[str, str], BadCase] = field(default_factory=dict)
    accepted_scores: List[float] = field(default_factory=list)
    evaluations: Dict[str, int] = field(default_factory=dict)
    init_result: Optional[EvalResult] = None
    advisor_available: bool = True

    @property
    def improvement(self) -> float:
        return self.score_cur - self.score_init

    def summary(self) -> dict:
        c = self.controller
        return {
            "env": self.env,
            "algorithm": c.name,
            "kind": c.kind,
            "score_init": self.score_init,
            "score": self.score_cur,
            "params": c.params,
            "accepted_scores": self.accepted_scores,
            "history": [h.to_dict() for h in self.history],
            "evaluations": self.evaluations,
            "advisor_available": self.advisor_available,
        }


@dataclass
class SessionResult:
    config: SessionConfig
    states: List[SessionState]

    def state(self, env: str) -> SessionState:
        return next(s for s in self.states if s.env == env)


def tune_params(controller, env, budget: int, seed: int, counter: EvalCounter,
                known_score: Optional[float] = None):
    """Optimize ``controller``'s parameters on ``env``.

    Returns (controller, score, BO result or None). With a zero budget or no
    tunable parameters the controller is evaluated once, unless its score is
    already known.
    """
    space = SearchSpace.from_manifest(controller.manifest)
    if budget == 0 or not space.dims:
        score = known_score if known_score is not None else counter.run(controller, env, "objective").score
        return controller, score, None
    res = optimize(lambda p: counter.run(controller.with_params(p), env, "objective").score,
                   space, budget, seed)
    return controller.with_params(res.best_point), res.best_value, res


def rebase_params(candidate, original: Sequence[ParamDecl], incumbent: Dict[str, float]):
    """Carry tuned values into a patch that left a declaration as originally shipped.

    A patch written against the untuned program repeats its declarations
    verbatim; those params keep the incumbent's tuned value so the edit is
    applied to the tuned controller. Changed declarations are left alone.
    """
    orig = {p.name: p for p in original}
    carry = {}
    for p in candidate.manifest:
        if orig.get(p.name) == p and p.name in incumbent and p.lo <= incumbent[p.name] <= p.hi:
            carry[p.name] = incumbent[p.name]
    return candidate.with_params(carry) if carry else candidate


class _Recorder:
    def __init__(self, root: Optional[Path]):
        self.root = root
        self.lines: List[str] = []

    def event(self, **payload):
        line = json.dumps(payload, sort_keys=True)
        self.lines.append(line)
        if self.root is not None:
            with open(self.root / "log.jsonl", "a", encoding="utf-8", newline="\n") as fh:
                fh.write(line + "\n")

    def write(self, rel: str, text: str):
        if self.root is not None:
            write_text(self.root / rel, text)


def _run_env(cfg: SessionConfig, env: EnvironmentDescriptor, advisor, rec: _Recorder) -> SessionState:
    counter = EvalCounter()
    entry = get(cfg.algorithm)
    controller = entry.controller()
    bundle = cfg.bundle or DOMAIN_BUNDLES[env.domain]

    init = counter.run(controller, env, "objective")
    rec.event(event="init", env=env.name, score=init.score)
    bo_seed = derive_seed(cfg.seed, env.name, "bo", 0)
    controller, score, bo = tune_params(controller, env, cfg.n_bayes, bo_seed, counter, known_score=init.score)
    state = SessionState(env.name, controller, init.score, score, init_result=init, evaluations=counter.counts)
    state.accepted_scores.append(score)
    rec.event(event="bayes", env=env.name, iteration=0, score=score, params=controller.params,
              evaluations=0 if bo is None else len(bo.history))
    if controller.source is not None:
        rec.write("iter-0/patch.ctl", controller.source)
    rec.write("iter-0/result.json", dump_json({
        "iteration": 0, "env": env.name, "score_init": init.score, "score": score,
        "params": controller.params, "bo": None if bo is None else bo.to_dict(),
        "case_scores": init.case_scores(),
    }))
    _write_best(rec, state)

    if cfg.n_reflect > 0 and not getattr(advisor, "available", False):
        state.advisor_available = False
        rec.event(event="advisor-unavailable", env=env.name,
                  detail=f"{getattr(advisor, 'kind', 'advisor')} advisor proposes nothing; parameter tuning only")
        _write_best(rec, state)
        return state

    reference = None
    for it in range(1, cfg.n_reflect + 1):
        if reference is None:
            counter.counts["reference"] += 1
            reference = reference_scores(cfg.reference, env)
        current = counter.run(state.controller, env, "comparison", record=True)
        for bc in compare_algs(current, reference, env.name):
            state.bad_cases[(bc.env, bc.case_id)] = bc
        cases = list(state.bad_cases.values())
        prompt = build_prompt(state.controller.source or f"(native algorithm {state.controller.name})",
                              cases, state.history, bundle, GRAMMAR,
                              binding=getattr(getattr(state.controller, "program", None), "binding", None))
        rec.write(f"iter-{it}/prompt.txt", prompt)
        for bc in select_bad_cases(cases):
            for row in bc.state_excerpt.splitlines():
                rec.event(event="bad-case-step", env=env.name, iteration=it, case=bc.case_id, triplet=row)
        patch = advisor.suggest(prompt)
        result = {"iteration": it, "env": env.name, "bad_cases": [b.to_dict() for b in select_bad_cases(cases)]}
        if patch is None:
            err = getattr(advisor, "last_error", None) or "no suggestion"
            state.history.append(HistoryTriplet("(no suggestion)", "", None, False, err))
            result.update(accepted=False, error=err, score=None)
            rec.event(event="no-patch", env=env.name, iteration=it, error=err)
        else:
            rec.write(f"iter-{it}/patch.ctl", patch.new_source)
            try:
                if not isinstance(state.controller, DslController):
                    raise ParseError("syntax", "native algorithms cannot take source patches", 1, 1)
                cand = state.controller.with_source(patch.new_source)
            except ParseError as exc:
                state.history.append(HistoryTriplet(patch.rationale, patch.new_source, None, False, str(exc)))
                result.update(rationale=patch.rationale, accepted=False, error=str(exc), score=None)
                rec.event(event="patch-rejected", env=env.name, iteration=it, error=str(exc))
            else:
                cand = rebase_params(cand, entry.manifest, state.controller.params)
                seed = derive_seed(cfg.seed, env.name, "bo", it)
                cand, new_score, bo = tune_params(cand, env, cfg.n_bayes, seed, counter)
                accepted = new_score > state.score_cur
                state.history.append(HistoryTriplet(patch.rationale, patch.new_source, new_score, accepted))
                if accepted:
                    state.controller, state.score_cur = cand, new_score
                    state.accepted_scores.append(new_score)
                result.update(rationale=patch.rationale, accepted=accepted, error=None, score=new_score,
                              params=cand.params, tuned_source=cand.source,
                              bo=None if bo is None else bo.to_dict())
                rec.event(event="patch-evaluated", env=env.name, iteration=it, score=new_score,
                          accepted=accepted, incumbent=state.score_cur)
        result["score_cur"] = state.score_cur
        rec.write(f"iter-{it}/result.json", dump_json(result))
        _write_best(rec, state)
    return state


def _write_best(rec: _Recorder, state: SessionState):
    if state.controller.source is not None:
        rec.write("best.ctl", state.controller.source)
    rec.write("best.json", dump_json(state.summary()))


def run_session(cfg: SessionConfig, advisor=None, envs: Optional[Sequence[EnvironmentDescriptor]] = None
                ) -> SessionResult:
    """Tune ``cfg.algorithm`` on every environment of ``cfg``; persist to ``cfg.out_dir`` if set.

    With one environment the session files sit directly in ``out_dir``;
    with several, each environment gets ``envs/<name>/``.
    """
    entry = get(cfg.algorithm)
    envs = list(envs) if envs is not None else [resolve_env(e) for e in cfg.envs]
    for e in envs:
        if e.domain != entry.domain:
            raise ValueError(f"{cfg.algorithm} is a {entry.domain} algorithm but {e.name} is {e.domain}")
    root = Path(cfg.out_dir) if cfg.out_dir else None
    if root is not None:
        root.mkdir(parents=True, exist_ok=True)
        for stale in ["log.jsonl"] + [f"envs/{safe_name(e.name)}/log.jsonl" for e in envs]:
            (root / stale).unlink(missing_ok=True)
        write_text(root / "session.json", dump_json(dict(cfg.to_dict(), env_cases={
            e.name: list(e.cases()) for e in envs})))
    states = []
    for e in envs:
        sub = None if root is None else (root if len(envs) == 1 else root / "envs" / safe_name(e.name))
        if sub is not None:
            sub.mkdir(parents=True, exist_ok=True)
        # every environment is tuned from scratch, so a scripted advisor starts over
        adv = advisor if advisor is not None else make_advisor(cfg.advisor, cfg.advisor_settings)
        adv.reset()
        states.append(_run_env(cfg, e, adv, _Recorder(sub)))
    result = SessionResult(cfg, states)
    if root is not None and len(envs) > 1:
        write_text(root / "summary.json", dump_json({s.env: s.summary() for s in states}))
    return result


def load_session(path) -> dict:
    """Read a session directory back: config, per-environment summaries and iteration results."""
    root = Path(path)
    config = json.loads((root / "session.json").read_text(encoding="utf-8"))
    dirs = [root] if (root / "best.json").exists() else sorted((root / "envs").iterdir())
    out = {"config": config, "envs": {}}
    for d in dirs:
        best = json.loads((d / "best.json").read_text(encoding="utf-8"))
        iters = sorted((p for p in d.glob("iter-*") if (p / "result.json").exists()),
                       key=lambda p: int(p.name.split("-")[1]))
        if (d / "best.ctl").exists():
            best["source"] = (d / "best.ctl").read_text(encoding="utf-8")
        best["iterations"] = [json.loads((p / "result.json").read_text(encoding="utf-8")) for p in iters]
        out["envs"][best["env"]] = best
    return out


def digest_dir(path) -> str:
    """SHA-256 over relative paths and bytes of every file under ``path``."""
    h = hashlib.sha256()
    root = Path(path)
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode() + b"\0" + p.read_bytes())
    return h.hexdigest()
