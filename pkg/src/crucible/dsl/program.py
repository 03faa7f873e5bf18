from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Dict, List, Mapping, Tuple, Union

from . import nodes as N
from .bindings import get_binding
from .errors import EvalError
from .interp import Machine
from .parser import parse_tree
from .render import render_body

Value = Union[float, Tuple[float, ...]]


@dataclass(frozen=True)
class ParamDecl:
    name: str
    default: float
    lo: float
    hi: float

    def to_dict(self) -> dict:
        return {"name": self.name, "default": self.default, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class ControllerProgram:
    """A parsed, checked controller. Equality is structural (source text is ignored)."""

    body: Tuple[N.Stmt, ...]
    binding: str
    source: str = field(default="", compare=False, repr=False)

    @property
    def canonical(self) -> str:
        return render_body(self.body)

    def node_count(self) -> int:
        return N.count_nodes(self.body)


@dataclass(frozen=True)
class EvalContext:
    """Inputs for one decision. Validated and frozen on construction."""

    binding: str
    inputs: Mapping[str, Value]

    def __post_init__(self):
        b = get_binding(self.binding)
        clean: Dict[str, Value] = {}
        extra = set(self.inputs) - set(b.inputs())
        if extra:
            raise ValueError(f"inputs not in the {b.name} binding: {sorted(extra)}")
        for name in b.scalars:
            if name not in self.inputs:
                raise ValueError(f"missing input {name!r}")
            v = float(self.inputs[name])
            if not math.isfinite(v):
                raise ValueError(f"input {name!r} is not finite")
            clean[name] = v
        for name, bound in b.arrays.items():
            if name not in self.inputs:
                raise ValueError(f"missing input array {name!r}")
            arr = tuple(float(x) for x in self.inputs[name])
            if len(arr) > bound:
                raise ValueError(f"input array {name!r} longer than its bound {bound}")
            if not all(math.isfinite(x) for x in arr):
                raise ValueError(f"input array {name!r} has non-finite entries")
            clean[name] = arr
        object.__setattr__(self, "inputs", MappingProxyType(clean))


def parse(source: str, binding: str = "abr") -> ControllerProgram:
    """Parse and check ``source`` against ``binding``; raises :class:`ParseError`."""
    return ControllerProgram(parse_tree(source, binding), binding, source)


def render(program: ControllerProgram) -> str:
    return render_body(program.body)


def param_manifest(program: ControllerProgram) -> List[ParamDecl]:
    return [ParamDecl(st.name, st.default, st.lo, st.hi)
            for st in program.body if isinstance(st, N.Param)]


def set_params(program: ControllerProgram, assignments: Mapping[str, float]) -> ControllerProgram:
    decls = {p.name: p for p in param_manifest(program)}
    for name, value in assignments.items():
        if name not in decls:
            raise ValueError(f"unknown param {name!r}")
        d = decls[name]
        if not d.lo <= value <= d.hi:
            raise ValueError(f"param {name!r}={value} outside [{d.lo}, {d.hi}]")
    if not assignments:
        return program
    body = tuple(
        N.Param(st.name, float(assignments[st.name]), st.lo, st.hi, st.pos)
        if isinstance(st, N.Param) and st.name in assignments else st
        for st in program.body
    )
    return ControllerProgram(body, program.binding, render_body(body))


def _bind_params(program: ControllerProgram) -> Dict[str, float]:
    return {st.name: st.default for st in program.body if isinstance(st, N.Param)}


def run(program: ControllerProgram, ctx: EvalContext) -> Tuple[float, int]:
    """Evaluate and also report the number of elementary steps taken."""
    if ctx.binding != program.binding:
        raise ValueError(f"context binding {ctx.binding!r} != program binding {program.binding!r}")
    m = Machine(ctx.inputs)
    m.vars.update(_bind_params(program))
    value = m.run(program.body)
    if not math.isfinite(value):
        raise EvalError("non-finite-result", f"returned {value}")
    return value, m.steps


def evaluate(program: ControllerProgram, ctx: EvalContext) -> float:
    return run(program, ctx)[0]
