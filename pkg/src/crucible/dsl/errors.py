from __future__ import annotations

KINDS = (
    "syntax",
    "unknown-identifier",
    "arity",
    "index-out-of-range",
    "division-by-zero",
    "non-finite-result",
)


class DslError(Exception):
    """Base class for controller-language failures.

    ``kind`` is one of :data:`KINDS`; ``line`` and ``column`` are 1-based.
    """

    def __init__(self, kind: str, message: str, line: int = 1, column: int = 1):
        if kind not in KINDS:
            raise ValueError(f"unknown error kind {kind!r}")
        self.kind = kind
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"{kind} at {line}:{column}: {message}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "line": self.line, "column": self.column, "message": self.message}


class ParseError(DslError):
    pass


class EvalError(DslError):
    pass
