"""Tables from study results: scores, CDFs, potentials and improvement ratios.

Every kind is a list of rows with a fixed column order, written as CSV (LF
line endings) or as a JSON mirror ``{"columns": [...], "rows": [...]}``.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from .algorithms import get_controller
from .envs.evaluate import evaluate_env, resolve_env
from .orchestrator import load_session
from .potential import improvement_ratio
from .study import cdf_points

KINDS = ("scores", "cdf", "potential", "improvement")
FORMATS = ("csv", "json")


def _pstd(values: Sequence[float]) -> float:
    return statistics.pstdev(values) if len(values) > 1 else 0.0


def _mean(values: Sequence[float]) -> float:
    return statistics.fmean(values) if values else float("nan")


def headline_capability(study: dict, alg: str):
    """Largest reflection count at the largest Bayes budget that has results."""
    cells = study["algorithms"][alg]["cells"]
    if not cells:
        return None
    return max(cells, key=lambda lab: (cells[lab]["n_bayes"], cells[lab]["n_reflect"]))


def _table_bayes(study: dict) -> int:
    budgets = [c["n_bayes"] for a in study["algorithms"].values() for c in a["cells"].values()]
    return max(budgets) if budgets else 0


def _reflect_levels(study: dict) -> List[int]:
    return sorted({c["n_reflect"] for a in study["algorithms"].values() for c in a["cells"].values()})


def potential_rows(study: dict) -> Tuple[List[str], List[list]]:
    """Per-algorithm summary: init, score per reflection count, improvement, potential, ideal (mean and std over envs)."""
    levels = _reflect_levels(study)
    bayes = _table_bayes(study)
    cols = ["algorithm", "init_mean", "init_std"]
    for r in levels:
        cols += [f"iter{r}_mean", f"iter{r}_std"]
    cols += ["impro_mean", "impro_std", "potential_mean", "potential_std", "ideal", "capability", "n_bayes"]
    rows = []
    envs = study["envs"]
    for alg, entry in study["algorithms"].items():
        if "score_init" not in entry:
            continue
        init = [entry["score_init"][e] for e in envs]
        row = [alg, _mean(init), _pstd(init)]
        by_reflect = {c["n_reflect"]: c for c in entry["cells"].values() if c["n_bayes"] == bayes}
        for r in levels:
            cell = by_reflect.get(r)
            vals = [cell["score_tuned"][e] for e in envs] if cell else []
            row += [_mean(vals) if vals else "", _pstd(vals) if vals else ""]
        head = headline_capability(study, alg)
        rep = entry["cells"][head]["report"]
        row += [rep["improvement"], rep["improvement_std"], rep["potential"], rep["potential_std"],
                entry["ideal_env"], head, entry["cells"][head]["n_bayes"]]
        rows.append(row)
    return cols, rows


def scores_rows(study: dict) -> Tuple[List[str], List[list]]:
    cols = ["role", "algorithm", "capability", "env", "score_init", "score_bo", "score_tuned"]
    rows = []
    for probe, per_env in study["probe_scores"].items():
        for env in study["envs"]:
            rows.append(["probe", probe, "", env, per_env[env], "", ""])
    for alg, entry in study["algorithms"].items():
        for label, cell in entry["cells"].items():
            for env in study["envs"]:
                rows.append(["algorithm", alg, label, env, entry["score_init"][env],
                             cell["score_bo"][env], cell["score_tuned"][env]])
    return cols, rows


def improvement_rows(study: dict) -> Tuple[List[str], List[list]]:
    cols = ["algorithm", "capability", "n_reflect", "n_bayes", "env", "score_bo", "score_tuned", "ratio"]
    rows = []
    for alg, entry in study["algorithms"].items():
        for label, cell in entry["cells"].items():
            for env in study["envs"]:
                ratio = cell["improvement_ratio"][env]
                rows.append([alg, label, cell["n_reflect"], cell["n_bayes"], env, cell["score_bo"][env],
                             cell["score_tuned"][env], "" if ratio is None else ratio])
    return cols, rows


def cdf_series(study: dict) -> Dict[str, List[float]]:
    """Per-case scores pooled over environments: ``<alg>/initial`` and ``<alg>/<capability>``."""
    out: Dict[str, List[float]] = {}
    for alg, entry in study["algorithms"].items():
        for label, per_env in entry.get("cases", {}).items():
            out[f"{alg}/{label}"] = [v for env in study["envs"] for v in per_env.get(env, {}).values()]
    return out


def cdf_rows(series: Dict[str, Sequence[float]]) -> Tuple[List[str], List[list]]:
    cols = ["series", "value", "cumulative"]
    rows = []
    for name, values in series.items():
        for x, f in cdf_points(values):
            rows.append([name, x, f])
    return cols, rows


def session_controller(session: dict, env: str):
    """Rebuild the best controller of one environment from a loaded session directory."""
    alg = session["config"]["algorithm"]
    best = session["envs"][env]
    ctl = get_controller(alg)
    if best.get("kind") == "dsl" and best.get("source"):
        ctl = ctl.with_source(best["source"], name=alg)
    return ctl.with_params(best["params"])


def session_study(path, with_cases: bool = True) -> dict:
    """Study-shaped view of one session (no probes), so score, cdf and improvement reports apply."""
    session = load_session(path)
    cfg = session["config"]
    alg = cfg["algorithm"]
    envs = list(session["envs"])
    label = f"r{cfg['n_reflect']}b{cfg['n_bayes']}"
    bests = session["envs"]
    cell = {
        "n_reflect": cfg["n_reflect"],
        "n_bayes": cfg["n_bayes"],
        "score_bo": {e: bests[e]["accepted_scores"][0] for e in envs},
        "score_tuned": {e: bests[e]["score"] for e in envs},
    }
    cell["improvement_ratio"] = {e: improvement_ratio(cell["score_tuned"][e], cell["score_bo"][e]) for e in envs}
    entry = {"cells": {label: cell}, "cases": {}, "score_init": {e: bests[e]["score_init"] for e in envs},
             "ideal_env": None}
    if with_cases:
        descs = {e: resolve_env(e) for e in envs}
        entry["cases"]["initial"] = {e: evaluate_env(get_controller(alg), descs[e], record=False).case_scores()
                                     for e in envs}
        entry["cases"][label] = {e: evaluate_env(session_controller(session, e), descs[e],
                                                 record=False).case_scores() for e in envs}
    return {"domain": None, "envs": envs, "probes": [], "capabilities": [label], "seed": cfg["seed"],
            "probe_scores": {}, "vectors": {}, "algorithms": {alg: entry}, "errors": []}


def build_rows(study: dict, kind: str) -> Tuple[List[str], List[list]]:
    if kind == "potential":
        if not study["probes"]:
            raise ValueError("the potential report needs a study (probe scores); a single session has none")
        return potential_rows(study)
    if kind == "scores":
        return scores_rows(study)
    if kind == "improvement":
        return improvement_rows(study)
    if kind == "cdf":
        return cdf_rows(cdf_series(study))
    raise ValueError(f"unknown report kind {kind!r} (choose from {', '.join(KINDS)})")


def render_table(cols: Sequence[str], rows: Sequence[list], fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])
        return buf.getvalue()
    if fmt == "json":
        return json.dumps({"columns": list(cols), "rows": [list(r) for r in rows]}, indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown format {fmt!r} (csv or json)")


def emit_report(study: dict, kind: str, fmt: str, path) -> Path:
    """Write one report file and return its path."""
    if kind not in KINDS:
        raise ValueError(f"unknown report kind {kind!r} (choose from {', '.join(KINDS)})")
    cols, rows = build_rows(study, kind)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_table(cols, rows, fmt))
    return path


def emit_all(study: dict, out_dir, formats: Sequence[str] = FORMATS) -> List[Path]:
    out = []
    for kind in KINDS:
        for fmt in formats:
            out.append(emit_report(study, kind, fmt, Path(out_dir) / f"{kind}.{fmt}"))
    return out
