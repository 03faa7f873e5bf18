"""Runnable algorithm handles shared by evaluation, tuning and the CLI.

A controller knows its domain, exposes a parameter manifest, can be copied
with new parameter values, and builds a fresh decision callback for one
simulator run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Tuple

from ..dsl import ControllerProgram, EvalContext, ParamDecl, evaluate, param_manifest, parse, render, set_params
from ..dsl.bindings import DOMAIN_BINDING
from ..envs.sched import priority_policy

BINDING_DOMAIN = {b: d for d, b in DOMAIN_BINDING.items()}


def cartpole_inputs(obs) -> dict:
    return {"x": obs.x, "x_dot": obs.x_dot, "theta": obs.theta, "theta_dot": obs.theta_dot,
            "theta_int": obs.theta_int, "step": float(obs.step)}


@dataclass(frozen=True)
class DslController:
    name: str
    program: ControllerProgram

    @property
    def domain(self) -> str:
        return BINDING_DOMAIN[self.program.binding]

    @property
    def kind(self) -> str:
        return "dsl"

    @property
    def manifest(self) -> List[ParamDecl]:
        return param_manifest(self.program)

    @property
    def params(self) -> Dict[str, float]:
        return {p.name: p.default for p in self.manifest}

    @property
    def source(self) -> str:
        return render(self.program)

    def with_params(self, assignments: Mapping[str, float]) -> "DslController":
        return DslController(self.name, set_params(self.program, assignments))

    def with_source(self, source: str, name: Optional[str] = None) -> "DslController":
        """Parse ``source`` against this controller's binding (raises ParseError)."""
        return DslController(name or self.name, parse(source, self.program.binding))

    def make_policy(self) -> Callable:
        prog = self.program
        binding = prog.binding
        if self.domain == "abr":
            return lambda obs: evaluate(prog, EvalContext(binding, obs.inputs()))
        if self.domain == "cartpole":
            return lambda obs: evaluate(prog, EvalContext(binding, cartpole_inputs(obs)))
        return priority_policy(lambda cand: evaluate(prog, EvalContext(binding, cand.inputs())))


@dataclass(frozen=True)
class NativeController:
    name: str
    domain: str
    factory: Callable[..., Callable] = field(repr=False, compare=False)
    declared: Tuple[ParamDecl, ...] = ()

    @property
    def kind(self) -> str:
        return "native"

    @property
    def manifest(self) -> List[ParamDecl]:
        return list(self.declared)

    @property
    def params(self) -> Dict[str, float]:
        return {p.name: p.default for p in self.declared}

    @property
    def source(self) -> None:
        return None

    def with_params(self, assignments: Mapping[str, float]) -> "NativeController":
        decls = {p.name: p for p in self.declared}
        for name, value in assignments.items():
            if name not in decls:
                raise ValueError(f"unknown param {name!r}")
            d = decls[name]
            if not d.lo <= value <= d.hi:
                raise ValueError(f"param {name!r}={value} outside [{d.lo}, {d.hi}]")
        new = tuple(ParamDecl(p.name, float(assignments.get(p.name, p.default)), p.lo, p.hi)
                    for p in self.declared)
        return NativeController(self.name, self.domain, self.factory, new)

    def make_policy(self) -> Callable:
        return self.factory(**self.params)
