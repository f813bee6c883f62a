"""Solver and verification harness for whole-space Dirichlet problems
driven by singular-kernel operators with an internal nonlinearity."""

from .model import (BoundaryDatum, Forcing, GridFunction, Nonlinearity,
                    ProblemSpec, ValidationReport, make_boundary_datum,
                    make_forcing, make_nonlinearity, sample_to_grid,
                    validate_problem)
from .quadrature import (KernelWeights, TailResult, TailRule,
                         build_kernel_weights, build_tail_rule,
                         quadrature_oracle, symmetric_difference,
                         tail_integral)

__all__ = [
    "BoundaryDatum", "Forcing", "GridFunction", "Nonlinearity",
    "ProblemSpec", "ValidationReport", "make_boundary_datum", "make_forcing",
    "make_nonlinearity", "sample_to_grid", "validate_problem",
    "KernelWeights", "TailResult", "TailRule", "build_kernel_weights",
    "build_tail_rule", "quadrature_oracle", "symmetric_difference",
    "tail_integral",
]

__version__ = "0.1.0"
