"""Potential studies: probes x environments, algorithms x capability profiles."""

from __future__ import annotations

import json
import logging
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .advisor import CapabilityProfile
from .algorithms import get, get_controller
from .envs.core import EnvironmentDescriptor
from .envs.evaluate import evaluate_env, resolve_env
from .orchestrator import SessionConfig, derive_seed, dump_json, run_session, write_text
from .potential import (ScoreMatrix, characteristic_vectors, ideal_environment, improvement_ratio,
                        normalize_scores, potential)

log = logging.getLogger(__name__)

DEFAULT_PROBES = {
    "abr": ("bba", "mpc", "rate"),
    "sched": ("fifo", "sjf", "mlf"),
    "cartpole": ("bang_bang", "pid", "lqr"),
}
FULL_GRID = tuple(CapabilityProfile(r, b) for r in (1, 2, 3) for b in (0, 10, 20))


@dataclass
class StudyConfig:
    algorithms: Tuple[str, ...]
    envs: Tuple[str, ...]
    probes: Optional[Tuple[str, ...]] = None
    capabilities: Tuple[CapabilityProfile, ...] = FULL_GRID
    advisor: str = "null"
    advisor_settings: Dict[str, str] = field(default_factory=dict)
    seed: int = 0
    out_dir: Optional[str] = None
    weighting: str = "similarity"

    def __post_init__(self):
        self.algorithms = tuple(self.algorithms)
        self.envs = tuple(self.envs)
        self.capabilities = tuple(self.capabilities)
        if not self.algorithms or not self.envs or not self.capabilities:
            raise ValueError("a study needs algorithms, environments and capability profiles")


def probe_matrix(probes: Sequence[str], envs: Sequence[EnvironmentDescriptor]) -> ScoreMatrix:
    scores = {p: {e.name: evaluate_env(get_controller(p), e, record=False).score for e in envs} for p in probes}
    return ScoreMatrix.from_mapping(scores, probes, [e.name for e in envs])


def cdf_points(values: Sequence[float]) -> List[Tuple[float, float]]:
    """(value, fraction of samples <= value) at each distinct value, ascending."""
    xs = sorted(values)
    n = len(xs)
    out: List[Tuple[float, float]] = []
    for i, x in enumerate(xs):
        if out and out[-1][0] == x:
            out[-1] = (x, (i + 1) / n)
        else:
            out.append((x, (i + 1) / n))
    return out


def run_potential_study(cfg: StudyConfig, envs: Optional[Sequence[EnvironmentDescriptor]] = None) -> dict:
    """Run every (algorithm, capability) session on every environment and compute potentials.

    Returns a JSON-ready dict (also written to ``<out_dir>/study.json``). A
    failing cell is recorded under ``errors`` and the rest of the study
    continues.
    """
    envs = list(envs) if envs is not None else [resolve_env(e) for e in cfg.envs]
    domains = {e.domain for e in envs}
    if len(domains) != 1:
        raise ValueError("all environments of a study must share one domain")
    domain = domains.pop()
    probes = cfg.probes or DEFAULT_PROBES[domain]
    for name in tuple(probes) + cfg.algorithms:
        if get(name).domain != domain:
            raise ValueError(f"{name} is not a {domain} algorithm")
    env_names = [e.name for e in envs]
    matrix = probe_matrix(probes, envs)
    normalized = normalize_scores(matrix)
    vectors = characteristic_vectors(matrix, normalized)
    root = Path(cfg.out_dir) if cfg.out_dir else None

    out = {
        "domain": domain,
        "envs": env_names,
        "probes": list(probes),
        "capabilities": [c.label for c in cfg.capabilities],
        "seed": cfg.seed,
        "weighting": cfg.weighting,
        "probe_scores": {p: dict(zip(env_names, row)) for p, row in zip(matrix.probes, matrix.scores)},
        "vectors": {v.env: list(v.components) for v in vectors},
        "algorithms": {},
        "errors": [],
    }
    for alg in cfg.algorithms:
        entry = {"cells": {}, "cases": {}}
        out["algorithms"][alg] = entry
        alg_seed = derive_seed(cfg.seed, "study", alg)
        s_orig: Optional[Dict[str, float]] = None
        for cap in cfg.capabilities:
            try:
                scfg = SessionConfig(alg, tuple(env_names), cap.n_reflect, cap.n_bayes, cfg.advisor,
                                     dict(cfg.advisor_settings), seed=alg_seed,
                                     out_dir=str(root / "sessions" / alg / cap.label) if root else None)
                res = run_session(scfg, envs=envs)
            except Exception as exc:  # one broken cell must not sink the study
                log.error("session %s/%s failed: %s", alg, cap.label, exc)
                out["errors"].append({"algorithm": alg, "capability": cap.label, "error": str(exc),
                                      "traceback": traceback.format_exc(limit=3)})
                continue
            if s_orig is None:
                s_orig = {s.env: s.score_init for s in res.states}
                entry["score_init"] = s_orig
                entry["ideal_env"] = ideal_environment(s_orig, matrix)
                entry["cases"]["initial"] = {s.env: s.init_result.case_scores() for s in res.states}
            s_tuned = {s.env: s.score_cur for s in res.states}
            s_bo = {s.env: s.accepted_scores[0] for s in res.states}
            rep = potential(alg, s_orig, s_tuned, entry["ideal_env"], vectors, cfg.weighting, cap.label)
            entry["cells"][cap.label] = {
                "n_reflect": cap.n_reflect,
                "n_bayes": cap.n_bayes,
                "score_bo": s_bo,
                "score_tuned": s_tuned,
                "improvement_ratio": {e: improvement_ratio(s_tuned[e], s_bo[e]) for e in env_names},
                "report": rep.to_dict(),
                "evaluations": {s.env: dict(s.evaluations) for s in res.states},
            }
            entry["cases"][cap.label] = {
                s.env: evaluate_env(s.controller, envs[env_names.index(s.env)], record=False).case_scores()
                for s in res.states}
    if root is not None:
        write_text(root / "study.json", dump_json(out))
    return out


def load_study(path) -> dict:
    p = Path(path)
    if p.is_dir():
        p = p / "study.json"
    return json.loads(p.read_text(encoding="utf-8"))
