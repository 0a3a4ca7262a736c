"""Determinant maximization under matroid constraints by exchange-graph local search."""

from detmax.instance import Instance, instance_from_dict, instance_to_dict, load_instance
from detmax.local_search import SolveConfig, SolveReport, solve

__all__ = [
    "Instance",
    "SolveConfig",
    "SolveReport",
    "instance_from_dict",
    "instance_to_dict",
    "load_instance",
    "solve",
]
