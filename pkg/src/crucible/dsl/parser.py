"""Tokenizer, recursive-descent parser and static checker for ``.ctl`` sources."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import List, Optional, Tuple

from . import nodes as N
from .bindings import Binding, get_binding
from .errors import ParseError

KEYWORDS = {"param", "in", "let", "if", "elif", "else", "for", "break", "return", "and", "or", "not"}

# name -> (min args, max args); None means variadic
BUILTINS = {
    "min": (2, None),
    "max": (2, None),
    "abs": (1, 1),
    "floor": (1, 1),
    "clamp": (3, 3),
    "ln": (1, 1),
    "len": (1, 1),
}

COMPARISONS = {"<", "<=", ">", ">=", "==", "!="}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\.\.|==|!=|<=|>=|[-+*/<>=()\[\]{},])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # number | ident | kw | op | eof
    text: str
    line: int
    col: int


def tokenize(source: str) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    line, line_start = 1, 0
    last = (1, 1)
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError("syntax", f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind == "ident" and text in KEYWORDS:
            kind = "kw"
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, text, line, col))
            last = (line, col + len(text) - 1)
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    # EOF errors point at the last real character so positions stay inside the source
    tokens.append(Token("eof", "", *last))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def _err(self, msg: str, tok: Optional[Token] = None) -> ParseError:
        tok = tok or self.tok
        if tok.kind == "eof":
            msg = f"{msg} (found end of input)"
        else:
            msg = f"{msg} (found {tok.text!r})"
        return ParseError("syntax", msg, tok.line, tok.col)

    def _at(self, kind: str, text: Optional[str] = None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def _eat(self, kind: str, text: Optional[str] = None) -> Token:
        if not self._at(kind, text):
            raise self._err(f"expected {text or kind}")
        t = self.tok
        self.i += 1
        return t

    def _accept(self, kind: str, text: Optional[str] = None) -> Optional[Token]:
        if self._at(kind, text):
            return self._eat(kind, text)
        return None

    # -- statements
    def program(self) -> Tuple[N.Stmt, ...]:
        body = []
        while not self._at("eof"):
            body.append(self.statement())
        return tuple(body)

    def block(self) -> Tuple[N.Stmt, ...]:
        self._eat("op", "{")
        body = []
        while not self._at("op", "}"):
            if self._at("eof"):
                raise self._err("expected '}'")
            body.append(self.statement())
        self._eat("op", "}")
        return tuple(body)

    def statement(self) -> N.Stmt:
        t = self.tok
        pos = (t.line, t.col)
        if t.kind != "kw":
            raise self._err("expected a statement")
        if t.text == "param":
            self.i += 1
            name = self._eat("ident").text
            self._eat("op", "=")
            default = self.signed_number()
            self._eat("kw", "in")
            self._eat("op", "[")
            lo = self.signed_number()
            self._eat("op", ",")
            hi = self.signed_number()
            self._eat("op", "]")
            return N.Param(name, default, lo, hi, pos)
        if t.text == "let":
            self.i += 1
            name = self._eat("ident").text
            self._eat("op", "=")
            return N.Let(name, self.expr(), pos)
        if t.text == "if":
            self.i += 1
            branches = [(self.expr(), self.block())]
            orelse = None
            while self._accept("kw", "elif"):
                branches.append((self.expr(), self.block()))
            if self._accept("kw", "else"):
                orelse = self.block()
            return N.If(tuple(branches), orelse, pos)
        if t.text == "for":
            self.i += 1
            var = self._eat("ident").text
            self._eat("kw", "in")
            start = self._eat("number")
            if float(start.text) != 0.0:
                raise self._err("loops must start at 0", start)
            self._eat("op", "..")
            fn = self._eat("ident")
            if fn.text != "len":
                raise self._err("loop bound must be len(<array>)", fn)
            self._eat("op", "(")
            arr = self._eat("ident").text
            self._eat("op", ")")
            return N.For(var, arr, self.block(), pos)
        if t.text == "break":
            self.i += 1
            return N.Break(pos)
        if t.text == "return":
            self.i += 1
            return N.Return(self.expr(), pos)
        raise self._err("expected a statement")

    def signed_number(self) -> float:
        neg = self._accept("op", "-") is not None
        v = float(self._eat("number").text)
        return -v if neg else v

    # -- expressions, lowest precedence first
    def expr(self) -> N.Expr:
        return self.or_expr()

    def or_expr(self) -> N.Expr:
        left = self.and_expr()
        while self._at("kw", "or"):
            t = self._eat("kw")
            left = N.Binary("or", left, self.and_expr(), (t.line, t.col))
        return left

    def and_expr(self) -> N.Expr:
        left = self.not_expr()
        while self._at("kw", "and"):
            t = self._eat("kw")
            left = N.Binary("and", left, self.not_expr(), (t.line, t.col))
        return left

    def not_expr(self) -> N.Expr:
        if self._at("kw", "not"):
            t = self._eat("kw")
            return N.Unary("not", self.not_expr(), (t.line, t.col))
        return self.comparison()

    def comparison(self) -> N.Expr:
        left = self.additive()
        if self.tok.kind == "op" and self.tok.text in COMPARISONS:
            t = self._eat("op")
            left = N.Binary(t.text, left, self.additive(), (t.line, t.col))
            if self.tok.kind == "op" and self.tok.text in COMPARISONS:
                raise self._err("comparisons cannot be chained")
        return left

    def additive(self) -> N.Expr:
        left = self.multiplicative()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            t = self._eat("op")
            left = N.Binary(t.text, left, self.multiplicative(), (t.line, t.col))
        return left

    def multiplicative(self) -> N.Expr:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            t = self._eat("op")
            left = N.Binary(t.text, left, self.unary(), (t.line, t.col))
        return left

    def unary(self) -> N.Expr:
        if self._at("op", "-"):
            t = self._eat("op")
            if self._at("number"):
                # fold "-<literal>" so negative constants render and re-parse identically
                n = self._eat("number")
                return N.Num(-float(n.text), (t.line, t.col))
            return N.Unary("-", self.unary(), (t.line, t.col))
        return self.postfix()

    def postfix(self) -> N.Expr:
        t = self.tok
        pos = (t.line, t.col)
        if t.kind == "number":
            self.i += 1
            return N.Num(float(t.text), pos)
        if t.kind == "ident":
            self.i += 1
            if self._accept("op", "("):
                args = []
                if not self._at("op", ")"):
                    args.append(self.expr())
                    while self._accept("op", ","):
                        args.append(self.expr())
                self._eat("op", ")")
                return N.Call(t.text, tuple(args), pos)
            if self._accept("op", "["):
                idx = self.expr()
                self._eat("op", "]")
                return N.Index(t.text, idx, pos)
            return N.Name(t.text, pos)
        if self._accept("op", "("):
            e = self.expr()
            self._eat("op", ")")
            return e
        raise self._err("expected an expression")


class _Checker:
    """Scope, arity and control-flow validation over a parsed tree."""

    def __init__(self, binding: Binding):
        self.b = binding
        self.scopes: List[set] = [set(binding.scalars)]
        self.param_names: set = set()
        self.loop_depth = 0

    def _err(self, kind: str, msg: str, node) -> ParseError:
        line, col = node.pos if node.pos != (0, 0) else (1, 1)
        return ParseError(kind, msg, line, col)

    def visible(self, name: str) -> bool:
        return any(name in s for s in self.scopes)

    def program(self, body) -> None:
        for st in body:
            if isinstance(st, N.Param):
                self.param(st)
        # params become visible in declaration order as the body is walked
        if not self.block(body, top=True):
            last = body[-1] if body else None
            raise ParseError("syntax", "program does not return on every path",
                             *(last.pos if last is not None else (1, 1)))

    def param(self, st: N.Param) -> None:
        if st.name in self.param_names:
            raise self._err("syntax", f"duplicate param {st.name!r}", st)
        if st.name in self.b.inputs() or st.name in BUILTINS:
            raise self._err("syntax", f"param {st.name!r} shadows a reserved name", st)
        if not (st.lo <= st.default <= st.hi):
            raise self._err("syntax", f"param {st.name!r} default {st.default} outside [{st.lo}, {st.hi}]", st)
        self.param_names.add(st.name)

    def block(self, body, top: bool = False) -> bool:
        """Check a block; return True if it returns on every path."""
        terminated = False
        for st in body:
            if terminated:
                raise self._err("syntax", "unreachable statement", st)
            terminated = self.stmt(st, top)
        return terminated

    def stmt(self, st, top: bool) -> bool:
        if isinstance(st, N.Param):
            if not top:
                raise self._err("syntax", "param declarations are only allowed at top level", st)
            self.scopes[0].add(st.name)
            return False
        if isinstance(st, N.Let):
            self.expr(st.value)
            if st.name in self.b.arrays:
                raise self._err("syntax", f"cannot assign to array {st.name!r}", st)
            if st.name in BUILTINS:
                raise self._err("syntax", f"{st.name!r} is a built-in", st)
            if not self.visible(st.name):
                self.scopes[-1].add(st.name)
            return False
        if isinstance(st, N.If):
            all_return = True
            for cond, body in st.branches:
                self.expr(cond)
                all_return &= self.scoped(body)
            if st.orelse is None:
                return False
            return self.scoped(st.orelse) and all_return
        if isinstance(st, N.For):
            if self.loop_depth:
                raise self._err("syntax", "nested loops are not allowed", st)
            if st.array not in self.b.arrays:
                raise self._err("unknown-identifier", f"{st.array!r} is not an input array", st)
            if self.visible(st.var) or st.var in self.b.arrays or st.var in BUILTINS:
                raise self._err("syntax", f"loop variable {st.var!r} shadows an existing name", st)
            self.loop_depth += 1
            self.scopes.append({st.var})
            self.block(st.body)
            self.scopes.pop()
            self.loop_depth -= 1
            return False
        if isinstance(st, N.Break):
            if not self.loop_depth:
                raise self._err("syntax", "break outside loop", st)
            return True
        if isinstance(st, N.Return):
            self.expr(st.value)
            return True
        raise TypeError(st)

    def scoped(self, body) -> bool:
        self.scopes.append(set())
        try:
            return self.block(body)
        finally:
            self.scopes.pop()

    def expr(self, e) -> None:
        if isinstance(e, N.Num):
            if not math.isfinite(e.value):
                raise self._err("syntax", "numeric literal out of range", e)
        elif isinstance(e, N.Name):
            if e.id in self.b.arrays:
                raise self._err("syntax", f"array {e.id!r} used as a scalar", e)
            if not self.visible(e.id):
                raise self._err("unknown-identifier", f"unknown identifier {e.id!r}", e)
        elif isinstance(e, N.Index):
            if e.array not in self.b.arrays:
                if self.visible(e.array):
                    raise self._err("syntax", f"{e.array!r} is not an array", e)
                raise self._err("unknown-identifier", f"unknown array {e.array!r}", e)
            self.expr(e.index)
        elif isinstance(e, N.Call):
            if e.func not in BUILTINS:
                raise self._err("unknown-identifier", f"unknown function {e.func!r}", e)
            lo, hi = BUILTINS[e.func]
            n = len(e.args)
            if n < lo or (hi is not None and n > hi):
                raise self._err("arity", f"{e.func}() takes {lo if lo == hi else f'at least {lo}'} argument(s), got {n}", e)
            if e.func == "len":
                arg = e.args[0]
                if not (isinstance(arg, N.Name) and arg.id in self.b.arrays):
                    raise self._err("syntax", "len() takes an input array", e)
            else:
                for a in e.args:
                    self.expr(a)
        elif isinstance(e, N.Unary):
            self.expr(e.operand)
        elif isinstance(e, N.Binary):
            self.expr(e.left)
            self.expr(e.right)
        else:
            raise TypeError(e)


def parse_tree(source: str, binding: str) -> Tuple[N.Stmt, ...]:
    b = get_binding(binding)
    body = _Parser(source).program()
    _Checker(b).program(body)
    return body
