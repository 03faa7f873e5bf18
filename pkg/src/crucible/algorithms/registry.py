"""Bundled algorithms, looked up by name."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib.resources import files
from typing import Dict, List, Optional, Tuple

from ..dsl import ParamDecl, param_manifest, parse
from ..dsl.bindings import DOMAIN_BINDING
from .controllers import DslController, NativeController
from .mpc import mpc_policy
from .pitree import pitree_import, tree_from_dict
from .sched_native import FairScheduler, RoundRobinScheduler

ASSETS = files(__package__).joinpath("assets")

# name -> (domain, kind); order is the listing order
_TABLE: Tuple[Tuple[str, str, str], ...] = (
    ("bba", "abr", "dsl"),
    ("bba_c", "abr", "dsl"),
    ("hyb", "abr", "dsl"),
    ("bola", "abr", "dsl"),
    ("rate", "abr", "dsl"),
    ("mpc", "abr", "native"),
    ("pitree", "abr", "dsl"),
    ("bang_bang", "cartpole", "dsl"),
    ("pid", "cartpole", "dsl"),
    ("pd", "cartpole", "dsl"),
    ("lqr", "cartpole", "dsl"),
    ("fifo", "sched", "dsl"),
    ("sjf", "sched", "dsl"),
    ("srtf", "sched", "dsl"),
    ("mlf", "sched", "dsl"),
    ("tetris_like", "sched", "dsl"),
    ("fair", "sched", "native"),
    ("round_robin", "sched", "native"),
)

_NATIVE = {
    "mpc": (lambda horizon, discount: mpc_policy(horizon, discount),
            (ParamDecl("horizon", 5.0, 1.0, 5.0), ParamDecl("discount", 1.0, 0.0, 2.0))),
    "fair": (lambda: FairScheduler(), ()),
    "round_robin": (lambda: RoundRobinScheduler(), ()),
}


class UnknownAlgorithm(KeyError):
    def __str__(self):
        return f"unknown algorithm {self.args[0]!r}"


@dataclass(frozen=True)
class AlgorithmEntry:
    name: str
    domain: str
    kind: str  # dsl | native
    source: str  # controller source (dsl) or native id
    manifest: Tuple[ParamDecl, ...]

    def controller(self):
        if self.kind == "dsl":
            return DslController(self.name, parse(self.source, DOMAIN_BINDING[self.domain]))
        factory, decls = _NATIVE[self.name]
        return NativeController(self.name, self.domain, factory, decls)


def _read_source(name: str) -> str:
    if name == "pitree":
        tree = tree_from_dict(json.loads(ASSETS.joinpath("trees", "pitree.json").read_text(encoding="utf-8")))
        return pitree_import(tree)
    return ASSETS.joinpath(f"{name}.ctl").read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def _entries() -> Dict[str, AlgorithmEntry]:
    out = {}
    for name, domain, kind in _TABLE:
        if kind == "dsl":
            src = _read_source(name)
            decls = tuple(param_manifest(parse(src, DOMAIN_BINDING[domain])))
        else:
            src = name
            decls = _NATIVE[name][1]
        out[name] = AlgorithmEntry(name, domain, kind, src, decls)
    return out


def get(name: str) -> AlgorithmEntry:
    try:
        return _entries()[name]
    except KeyError:
        raise UnknownAlgorithm(name) from None


def list_algorithms(domain: Optional[str] = None) -> List[str]:
    return [n for n, d, _ in _TABLE if domain is None or d == domain]


def get_controller(name: str):
    return get(name).controller()
