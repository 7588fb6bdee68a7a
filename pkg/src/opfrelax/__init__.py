"""Convex relaxations of AC optimal power flow with determinant cuts and cycle constraints."""

from .caseio import Network, load_case, parse_case, validate_network
from .model import build_ac, build_psdp, build_socp
from .solver import SolveOptions, SolveResult, solve, solve_ac_heuristic

__all__ = [
    "Network",
    "load_case",
    "parse_case",
    "validate_network",
    "build_ac",
    "build_socp",
    "build_psdp",
    "SolveOptions",
    "SolveResult",
    "solve",
    "solve_ac_heuristic",
]

__version__ = "0.1.0"
