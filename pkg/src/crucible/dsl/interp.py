"""Deterministic tree-walking evaluator.

Every node visit costs one step. Loops cannot nest and only range over
input arrays of bounded length, so a run needs at most
``count_nodes(body) * max(1, max_array_len)`` steps.
"""

from __future__ import annotations

import math

from . import nodes as N
from .errors import EvalError

_BREAK = object()


class _Return(Exception):
    def __init__(self, value: float):
        self.value = value


def _fail(kind: str, msg: str, node) -> EvalError:
    line, col = node.pos if node.pos != (0, 0) else (1, 1)
    return EvalError(kind, msg, line, col)


def _finite(v: float, node) -> float:
    if not math.isfinite(v):
        raise _fail("non-finite-result", f"result {v} is not finite", node)
    return v


class Machine:
    def __init__(self, inputs):
        self.inputs = inputs
        self.vars = {}
        self.steps = 0

    def run(self, body) -> float:
        try:
            self.block(body)
        except _Return as r:
            return r.value
        # the checker guarantees a return on every path
        raise AssertionError("program fell off the end")

    def block(self, body):
        for st in body:
            if self.stmt(st) is _BREAK:
                return _BREAK
        return None

    def stmt(self, st):
        self.steps += 1
        t = type(st)
        if t is N.Let:
            self.vars[st.name] = self.expr(st.value)
        elif t is N.If:
            for cond, body in st.branches:
                if self.expr(cond) != 0.0:
                    return self.block(body)
            if st.orelse is not None:
                return self.block(st.orelse)
        elif t is N.For:
            arr = self.inputs[st.array]
            for i in range(len(arr)):
                self.vars[st.var] = float(i)
                if self.block(st.body) is _BREAK:
                    break
        elif t is N.Return:
            raise _Return(self.expr(st.value))
        elif t is N.Break:
            return _BREAK
        elif t is N.Param:
            pass  # bound before the run starts
        else:
            raise TypeError(st)
        return None

    def lookup(self, name: str):
        try:
            return self.vars[name]
        except KeyError:
            return self.inputs[name]

    def expr(self, e) -> float:
        self.steps += 1
        t = type(e)
        if t is N.Num:
            return e.value
        if t is N.Name:
            return self.lookup(e.id)
        if t is N.Binary:
            op = e.op
            if op == "and":
                return 1.0 if self.expr(e.left) != 0.0 and self.expr(e.right) != 0.0 else 0.0
            if op == "or":
                return 1.0 if self.expr(e.left) != 0.0 or self.expr(e.right) != 0.0 else 0.0
            a = self.expr(e.left)
            b = self.expr(e.right)
            if op == "+":
                return _finite(a + b, e)
            if op == "-":
                return _finite(a - b, e)
            if op == "*":
                return _finite(a * b, e)
            if op == "/":
                if b == 0.0:
                    raise _fail("division-by-zero", "division by zero", e)
                return _finite(a / b, e)
            if op == "<":
                return 1.0 if a < b else 0.0
            if op == "<=":
                return 1.0 if a <= b else 0.0
            if op == ">":
                return 1.0 if a > b else 0.0
            if op == ">=":
                return 1.0 if a >= b else 0.0
            if op == "==":
                return 1.0 if a == b else 0.0
            if op == "!=":
                return 1.0 if a != b else 0.0
            raise TypeError(op)
        if t is N.Index:
            arr = self.inputs[e.array]
            raw = self.expr(e.index)
            i = int(raw)  # truncates toward zero
            if not 0 <= i < len(arr):
                raise _fail("index-out-of-range", f"{e.array}[{i}] with length {len(arr)}", e)
            return arr[i]
        if t is N.Unary:
            v = self.expr(e.operand)
            if e.op == "-":
                return -v
            return 1.0 if v == 0.0 else 0.0
        if t is N.Call:
            return self.call(e)
        raise TypeError(e)

    def call(self, e) -> float:
        f = e.func
        if f == "len":
            return float(len(self.inputs[e.args[0].id]))
        args = [self.expr(a) for a in e.args]
        if f == "min":
            return min(args)
        if f == "max":
            return max(args)
        if f == "abs":
            return abs(args[0])
        if f == "floor":
            return float(math.floor(args[0]))
        if f == "clamp":
            x, lo, hi = args
            return min(max(x, lo), hi)
        if f == "ln":
            if args[0] <= 0.0:
                raise _fail("non-finite-result", f"ln({args[0]}) is not finite", e)
            return math.log(args[0])
        raise TypeError(f)
