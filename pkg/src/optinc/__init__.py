"""Optimal inconclusive discrimination of coherent states with photon-counting feedback receivers."""

from .core import (
    SIMPLEX_TOL,
    ImperfectionModel,
    OptIncError,
    ProbabilityTriple,
    SimplexError,
    SolverError,
    StrategySpec,
    ValidationError,
    helstrom_error,
    homodyne_error,
    idp_bound,
    optimal_inconclusive_error,
    overlap_sq,
)

__version__ = "0.1.0"
