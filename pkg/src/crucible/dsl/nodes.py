"""AST node types for controller programs.

Positions are carried for error reporting only and never take part in
equality, so two programs are structurally equal iff their trees match.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

Pos = Tuple[int, int]
_NOPOS: Pos = (0, 0)


def _pos():
    return field(default=_NOPOS, compare=False, repr=False)


@dataclass(frozen=True)
class Num:
    value: float
    pos: Pos = _pos()


@dataclass(frozen=True)
class Name:
    id: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class Index:
    array: str
    index: "Expr"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Call:
    func: str
    args: Tuple["Expr", ...]
    pos: Pos = _pos()


@dataclass(frozen=True)
class Unary:
    op: str  # "-" or "not"
    operand: "Expr"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    pos: Pos = _pos()


Expr = Union[Num, Name, Index, Call, Unary, Binary]


@dataclass(frozen=True)
class Param:
    name: str
    default: float
    lo: float
    hi: float
    pos: Pos = _pos()


@dataclass(frozen=True)
class Let:
    name: str
    value: Expr
    pos: Pos = _pos()


@dataclass(frozen=True)
class If:
    branches: Tuple[Tuple[Expr, Tuple["Stmt", ...]], ...]
    orelse: Optional[Tuple["Stmt", ...]] = None
    pos: Pos = _pos()


@dataclass(frozen=True)
class For:
    var: str
    array: str
    body: Tuple["Stmt", ...]
    pos: Pos = _pos()


@dataclass(frozen=True)
class Break:
    pos: Pos = _pos()


@dataclass(frozen=True)
class Return:
    value: Expr
    pos: Pos = _pos()


Stmt = Union[Param, Let, If, For, Break, Return]


def count_nodes(node) -> int:
    """Number of AST nodes (statements and expressions) under ``node``."""
    if isinstance(node, tuple):
        return sum(count_nodes(n) for n in node)
    if isinstance(node, (Num, Name, Break, Param)):
        return 1
    if isinstance(node, Index):
        return 1 + count_nodes(node.index)
    if isinstance(node, Call):
        return 1 + count_nodes(node.args)
    if isinstance(node, Unary):
        return 1 + count_nodes(node.operand)
    if isinstance(node, Binary):
        return 1 + count_nodes(node.left) + count_nodes(node.right)
    if isinstance(node, (Let, Return)):
        return 1 + count_nodes(node.value)
    if isinstance(node, If):
        n = 1
        for cond, body in node.branches:
            n += count_nodes(cond) + count_nodes(body)
        if node.orelse is not None:
            n += count_nodes(node.orelse)
        return n
    if isinstance(node, For):
        return 1 + count_nodes(node.body)
    raise TypeError(f"not an AST node: {node!r}")
