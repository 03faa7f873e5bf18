"""Canonical text form of controller programs.

Two-space indentation, one statement per line, single spaces around binary
operators, minimal parentheses. The output ends with a single LF.
"""

from __future__ import annotations

from . import nodes as N

INDENT = "  "

_PREC = {"or": 1, "and": 2, "<": 4, "<=": 4, ">": 4, ">=": 4, "==": 4, "!=": 4,
         "+": 5, "-": 5, "*": 6, "/": 6}
_NOT_PREC = 3
_NEG_PREC = 7
_ATOM_PREC = 9


def fmt_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _prec(e) -> int:
    if isinstance(e, N.Binary):
        return _PREC[e.op]
    if isinstance(e, N.Unary):
        return _NOT_PREC if e.op == "not" else _NEG_PREC
    if isinstance(e, N.Num) and e.value < 0:
        return _NEG_PREC
    return _ATOM_PREC


def _wrap(e, min_prec: int) -> str:
    s = render_expr(e)
    return f"({s})" if _prec(e) < min_prec else s


def render_expr(e) -> str:
    if isinstance(e, N.Num):
        return fmt_number(e.value)
    if isinstance(e, N.Name):
        return e.id
    if isinstance(e, N.Index):
        return f"{e.array}[{render_expr(e.index)}]"
    if isinstance(e, N.Call):
        return f"{e.func}({', '.join(render_expr(a) for a in e.args)})"
    if isinstance(e, N.Unary):
        if e.op == "not":
            return f"not {_wrap(e.operand, _NOT_PREC)}"
        if isinstance(e.operand, N.Num):
            # "-5" would re-parse as a folded literal, not a negation
            return f"-({render_expr(e.operand)})"
        inner = _wrap(e.operand, _NEG_PREC)
        # keep "-" and a folded negative literal from fusing into one token
        return f"-{inner}" if not inner.startswith("-") else f"- {inner}"
    if isinstance(e, N.Binary):
        p = _PREC[e.op]
        if p == 4:
            return f"{_wrap(e.left, p + 1)} {e.op} {_wrap(e.right, p + 1)}"
        return f"{_wrap(e.left, p)} {e.op} {_wrap(e.right, p + 1)}"
    raise TypeError(e)


def _render_block(body, depth: int, out: list) -> None:
    pad = INDENT * depth
    for st in body:
        if isinstance(st, N.Param):
            out.append(f"{pad}param {st.name} = {fmt_number(st.default)} in "
                       f"[{fmt_number(st.lo)}, {fmt_number(st.hi)}]")
        elif isinstance(st, N.Let):
            out.append(f"{pad}let {st.name} = {render_expr(st.value)}")
        elif isinstance(st, N.If):
            for k, (cond, inner) in enumerate(st.branches):
                head = "if" if k == 0 else "} elif"
                out.append(f"{pad}{head} {render_expr(cond)} {{")
                _render_block(inner, depth + 1, out)
            if st.orelse is not None:
                out.append(f"{pad}}} else {{")
                _render_block(st.orelse, depth + 1, out)
            out.append(f"{pad}}}")
        elif isinstance(st, N.For):
            out.append(f"{pad}for {st.var} in 0..len({st.array}) {{")
            _render_block(st.body, depth + 1, out)
            out.append(f"{pad}}}")
        elif isinstance(st, N.Break):
            out.append(f"{pad}break")
        elif isinstance(st, N.Return):
            out.append(f"{pad}return {render_expr(st.value)}")
        else:
            raise TypeError(st)


def render_body(body) -> str:
    out: list = []
    _render_block(body, 0, out)
    return "\n".join(out) + "\n"
