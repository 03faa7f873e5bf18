"""Import decision-tree bitrate policies as controller programs.

Trees are JSON: internal nodes ``{"feature", "threshold", "left", "right"}``
send inputs with ``feature < threshold`` left; leaves are ``{"leaf": level}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Union

from ..dsl.bindings import get_binding
from ..dsl.render import fmt_number


@dataclass(frozen=True)
class TreeLeaf:
    level: int


@dataclass(frozen=True)
class TreeNode:
    feature: str
    threshold: float
    left: "Tree"
    right: "Tree"


Tree = Union[TreeLeaf, TreeNode]


def tree_from_dict(data: dict, binding: str = "abr") -> Tree:
    scalars = set(get_binding(binding).scalars)

    def build(d, depth):
        if depth > 64:
            raise ValueError("tree deeper than 64 levels")
        if not isinstance(d, dict):
            raise ValueError(f"tree node must be an object, got {d!r}")
        if "leaf" in d:
            return TreeLeaf(int(d["leaf"]))
        try:
            feature, threshold = d["feature"], float(d["threshold"])
            left, right = d["left"], d["right"]
        except KeyError as exc:
            raise ValueError(f"tree node missing key {exc}") from None
        if feature not in scalars:
            raise ValueError(f"unknown feature {feature!r}")
        if not math.isfinite(threshold):
            raise ValueError("threshold must be finite")
        return TreeNode(feature, threshold, build(left, depth + 1), build(right, depth + 1))

    return build(data, 0)


def tree_to_dict(tree: Tree) -> dict:
    if isinstance(tree, TreeLeaf):
        return {"leaf": tree.level}
    return {"feature": tree.feature, "threshold": tree.threshold,
            "left": tree_to_dict(tree.left), "right": tree_to_dict(tree.right)}


def load_tree(path, binding: str = "abr") -> Tree:
    return tree_from_dict(json.loads(Path(path).read_text(encoding="utf-8")), binding)


def tree_predict(tree: Tree, inputs: Mapping[str, float]) -> int:
    while isinstance(tree, TreeNode):
        tree = tree.left if inputs[tree.feature] < tree.threshold else tree.right
    return tree.level


def pitree_import(tree: Tree) -> str:
    """Render ``tree`` as nested if/else controller source."""
    lines = []

    def emit(t, indent):
        pad = "  " * indent
        if isinstance(t, TreeLeaf):
            lines.append(f"{pad}return {t.level}")
            return
        lines.append(f"{pad}if {t.feature} < {fmt_number(t.threshold)} {{")
        emit(t.left, indent + 1)
        lines.append(f"{pad}}} else {{")
        emit(t.right, indent + 1)
        lines.append(f"{pad}}}")

    emit(tree, 0)
    return "\n".join(lines) + "\n"
