"""Bundled controllers: DSL sources, native algorithms, and importers."""

from .controllers import DslController, NativeController
from .lqr import lqr_gain
from .pitree import load_tree, pitree_import, tree_from_dict, tree_predict, tree_to_dict
from .registry import AlgorithmEntry, UnknownAlgorithm, get, get_controller, list_algorithms

__all__ = [
    "AlgorithmEntry",
    "DslController",
    "NativeController",
    "UnknownAlgorithm",
    "get",
    "get_controller",
    "list_algorithms",
    "load_tree",
    "lqr_gain",
    "pitree_import",
    "tree_from_dict",
    "tree_predict",
    "tree_to_dict",
]
