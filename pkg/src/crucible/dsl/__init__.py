"""A small terminating language for controller logic.

Programs declare tunable ``param`` values, compute with ``let``/``if``/bounded
``for`` loops, and ``return`` one real number. The same parsed program is what
the Bayesian optimizer re-parameterizes and what the advisor rewrites.
"""

from importlib.resources import files

from .bindings import BINDINGS, DOMAIN_BINDING, Binding, get_binding
from .errors import DslError, EvalError, ParseError
from .program import (
    ControllerProgram,
    EvalContext,
    ParamDecl,
    evaluate,
    param_manifest,
    parse,
    render,
    run,
    set_params,
)

GRAMMAR = files(__package__).joinpath("grammar.ebnf").read_text(encoding="utf-8")

__all__ = [
    "BINDINGS",
    "DOMAIN_BINDING",
    "GRAMMAR",
    "Binding",
    "ControllerProgram",
    "DslError",
    "EvalContext",
    "EvalError",
    "ParamDecl",
    "ParseError",
    "evaluate",
    "get_binding",
    "param_manifest",
    "parse",
    "render",
    "run",
    "set_params",
]
