"""Exact solver for distributionally robust chance-constrained set covering."""

from __future__ import annotations

from .model import (
    MODES,
    Instance,
    InstanceError,
    SolveConfig,
    Solution,
    Tolerances,
    read_instance,
    read_solution,
    validate_instance,
    write_instance,
    write_solution,
)
from .risk import empirical_reliability, true_reliability, z_membership
from .solvers import enumerate_optimum, enumerate_saa, root_bounds, solve_drc, solve_saa

__all__ = [
    "MODES",
    "Instance",
    "InstanceError",
    "SolveConfig",
    "Solution",
    "Tolerances",
    "empirical_reliability",
    "enumerate_optimum",
    "enumerate_saa",
    "read_instance",
    "read_solution",
    "root_bounds",
    "solve_drc",
    "solve_saa",
    "true_reliability",
    "validate_instance",
    "write_instance",
    "write_solution",
    "z_membership",
]
