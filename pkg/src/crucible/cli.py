"""Command line: eval, tune, potential, report, envs, algs.

Results go to stdout as JSON. Errors go to stderr as one JSON line
``{"error": <type>, "message": <text>}``; usage errors exit 2, runtime
errors exit 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from .advisor import CapabilityProfile
from .algorithms import get, get_controller, list_algorithms
from .config import load_config
from .envs.evaluate import builtin_env_specs, evaluate_env, resolve_env
from .orchestrator import SessionConfig, dump_json, run_session, safe_name
from .plotting import plot_all
from .reports import FORMATS, KINDS, emit_report, session_study
from .study import FULL_GRID, StudyConfig, load_study, run_potential_study

log = logging.getLogger("crucible")

_GLOBAL_DEFAULTS = {"seed": 0, "out": None, "config": None}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(json.dumps({"error": "usage", "message": message}), file=sys.stderr)
        sys.exit(2)


def _split(value: Optional[str]) -> List[str]:
    return [v.strip() for v in (value or "").split(",") if v.strip()]


def parse_grid(value: str) -> List[CapabilityProfile]:
    """``full`` or comma-separated labels such as ``r1b10,r3b20``."""
    if value == "full":
        return list(FULL_GRID)
    out = []
    for item in _split(value):
        m = re.fullmatch(r"r(\d+)b(\d+)", item)
        if not m:
            raise UsageError(f"bad capability {item!r}; expected r<reflections>b<budget>, e.g. r2b10")
        try:
            out.append(CapabilityProfile(int(m.group(1)), int(m.group(2))))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    if not out:
        raise UsageError("empty capability grid")
    return out


def _split_specs(value: str) -> List[str]:
    """Comma-separated environment specs; a piece without ``domain:`` continues the previous spec."""
    out: List[str] = []
    for piece in _split(value):
        if out and ":" not in piece:
            out[-1] += "," + piece
        else:
            out.append(piece)
    return out


def _envs(args, settings) -> List[str]:
    specs = []
    for v in args.env or []:
        specs += _split_specs(v)
    specs = specs or list(settings.envs)
    if not specs:
        raise UsageError("no environment given (use --env or the [environments] config section)")
    return specs


def _print(obj) -> None:
    sys.stdout.write(dump_json(obj))


def cmd_eval(args, settings) -> int:
    ctl = get_controller(args.alg)
    if args.source:
        ctl = ctl.with_source(Path(args.source).read_text(encoding="utf-8"), name=args.alg)
    if args.param:
        assign = {}
        for item in args.param:
            name, _, value = item.partition("=")
            assign[name.strip()] = float(value)
        ctl = ctl.with_params(assign)
    out = []
    for spec in _envs(args, settings):
        res = evaluate_env(ctl, resolve_env(spec, settings.trace_count), seed=args.seed, record=False)
        row = {"algorithm": args.alg, "env": res.env, "score": res.score, "cases": len(res.cases)}
        if args.cases:
            row["case_scores"] = res.case_scores()
        out.append(row)
    result = out[0] if len(out) == 1 else out
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(dump_json(result), encoding="utf-8")
    _print(result)
    return 0


def cmd_tune(args, settings) -> int:
    specs = _envs(args, settings)
    envs = [resolve_env(s, settings.trace_count) for s in specs]
    out = args.out or str(Path("crucible-out") / f"tune-{safe_name(args.alg)}")
    cfg = SessionConfig(
        args.alg, tuple(e.name for e in envs),
        settings.reflect if args.reflect is None else args.reflect,
        settings.bayes if args.bayes is None else args.bayes,
        args.advisor or settings.advisor, dict(settings.advisor_settings),
        reference=args.reference, seed=args.seed, out_dir=out)
    res = run_session(cfg, envs=envs)
    _print({"session": out, "algorithm": args.alg, "envs": [
        {"env": s.env, "score_init": s.score_init, "score_bo": s.accepted_scores[0], "score": s.score_cur,
         "accepted": sum(1 for h in s.history if h.accepted), "iterations": len(s.history),
         "evaluations": dict(s.evaluations)} for s in res.states]})
    return 0


def _write_reports(study: dict, out: Path, kinds: Sequence[str], formats: Sequence[str], plots: bool) -> List[str]:
    files = []
    for kind in kinds:
        for fmt in formats:
            files.append(str(emit_report(study, kind, fmt, out / f"{kind}.{fmt}")))
    if plots:
        files += [str(p) for p in plot_all(study, out)]
    return files


def cmd_potential(args, settings) -> int:
    algs = _split(args.algs)
    if not algs:
        raise UsageError("--algs needs at least one algorithm")
    out = Path(args.out or "crucible-out/potential")
    cfg = StudyConfig(tuple(algs), tuple(_envs(args, settings)), tuple(_split(args.probes)) or None,
                      tuple(parse_grid(args.grid)) if args.grid else
                      (CapabilityProfile(settings.reflect or 1, settings.bayes),),
                      args.advisor or settings.advisor, dict(settings.advisor_settings), args.seed, str(out),
                      args.weighting)
    envs = [resolve_env(e, settings.trace_count) for e in cfg.envs]
    study = run_potential_study(cfg, envs=envs)
    files = _write_reports(study, out, KINDS, FORMATS, not args.no_plots)
    _print({"study": str(out / "study.json"), "reports": files, "errors": study["errors"],
            "potential": {a: {lab: c["report"]["potential"] for lab, c in e["cells"].items()}
                          for a, e in study["algorithms"].items()}})
    return 1 if study["errors"] else 0


def cmd_report(args, settings) -> int:
    if bool(args.study) == bool(args.session):
        raise UsageError("give exactly one of --study or --session")
    if args.study:
        study = load_study(args.study)
        kinds = KINDS if args.kind == "all" else (args.kind,)
        default_out = Path(args.study) if Path(args.study).is_dir() else Path(args.study).parent
    else:
        kinds = tuple(k for k in KINDS if k != "potential") if args.kind == "all" else (args.kind,)
        study = session_study(args.session, with_cases="cdf" in kinds)
        default_out = Path(args.session) / "reports"
    formats = FORMATS if args.format == "all" else (args.format,)
    files = _write_reports(study, Path(args.out) if args.out else default_out, kinds, formats,
                           args.plots and args.study is not None)
    _print({"reports": files})
    return 0


def cmd_envs(args, settings) -> int:
    rows = []
    for spec in builtin_env_specs():
        domain = spec.split(":", 1)[0]
        rows.append({"env": spec, "domain": domain})
    _print(rows)
    return 0


def cmd_algs(args, settings) -> int:
    rows = []
    for name in list_algorithms(args.domain):
        entry = get(name)
        rows.append({"name": name, "domain": entry.domain, "kind": entry.kind,
                     "params": {d.name: {"default": d.default, "lo": d.lo, "hi": d.hi} for d in entry.manifest}})
    _print(rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, help="master seed (default 0)")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--config", help="INI file with [advisor], [environments], [budgets]")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = _Parser(prog="crucible", parents=[common],
                description="Tune controller programs with parameter search and advisor-proposed edits.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("eval", parents=[common], help="score one algorithm on environments")
    e.add_argument("--alg", required=True)
    e.add_argument("--env", action="append", help="environment spec; repeat or comma-separate")
    e.add_argument("--source", help="evaluate this controller source instead of the bundled one")
    e.add_argument("--param", action="append", help="override a parameter, name=value")
    e.add_argument("--cases", action="store_true", help="include per-case scores")
    e.set_defaults(func=cmd_eval)

    t = sub.add_parser("tune", parents=[common], help="run a tuning session")
    t.add_argument("--alg", required=True)
    t.add_argument("--env", action="append")
    t.add_argument("--reflect", type=int, help="reflection iterations")
    t.add_argument("--bayes", type=int, help="Bayesian optimization budget per call")
    t.add_argument("--advisor", help="null, scripted:<file> or http")
    t.add_argument("--reference", default="auto",
                   help="auto, offline-optimal, best-of-builtins or constant:<score>")
    t.set_defaults(func=cmd_tune)

    q = sub.add_parser("potential", parents=[common], help="run a potential study and write reports")
    q.add_argument("--algs", required=True, help="comma-separated algorithms")
    q.add_argument("--envs", dest="env", action="append", help="comma-separated environment specs")
    q.add_argument("--probes", help="comma-separated probe algorithms (domain default otherwise)")
    q.add_argument("--grid", help="capability grid: 'full' or labels like r1b10,r2b20")
    q.add_argument("--advisor")
    q.add_argument("--weighting", choices=("similarity", "distance"), default="similarity")
    q.add_argument("--no-plots", action="store_true")
    q.set_defaults(func=cmd_potential)

    r = sub.add_parser("report", parents=[common], help="regenerate reports from a study or session directory")
    r.add_argument("--study")
    r.add_argument("--session")
    r.add_argument("--kind", choices=KINDS + ("all",), default="all")
    r.add_argument("--format", choices=FORMATS + ("all",), default="all")
    r.add_argument("--plots", action="store_true", help="also render PNG figures (studies only)")
    r.set_defaults(func=cmd_report)

    n = sub.add_parser("envs", parents=[common], help="list built-in environment specs")
    n.set_defaults(func=cmd_envs)

    a = sub.add_parser("algs", parents=[common], help="list bundled algorithms")
    a.add_argument("--domain", choices=("abr", "cartpole", "sched"))
    a.set_defaults(func=cmd_algs)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help exits 0, usage errors 2
        return int(exc.code or 0)
    for key, default in _GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, default)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        settings = load_config(args.config)
        return args.func(args, settings)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return 2
    except Exception as exc:
        log.debug("command failed", exc_info=True)
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
