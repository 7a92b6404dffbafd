"""Cooperative parallel CVRP solver."""

from .instance import (
    EdgeWeightKind,
    Instance,
    NeighborLists,
    build_neighbor_lists,
    edge_cost,
    load_instance,
    parse_cvrplib,
)
from .params import SolverParams
from .solution import Action, CandidateChange, Solution, full_feasibility_check

__all__ = [
    "Action",
    "CandidateChange",
    "EdgeWeightKind",
    "Instance",
    "NeighborLists",
    "Solution",
    "SolverParams",
    "build_neighbor_lists",
    "edge_cost",
    "full_feasibility_check",
    "load_instance",
    "parse_cvrplib",
]

__version__ = "0.1.0"
