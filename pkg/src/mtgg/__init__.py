"""Affine Bayesian equilibria of a two-task global game on regular graphs."""

__version__ = "0.1.0"

from .errors import ConfigError, DomainError, SolverError
from .equilibrium import SolveConfig, SolveResult, solve_affine_bne
from .policy import AffinePolicy, GameParams, belief, min_policy, switching_curve
from .simulation import deviation_gain, make_regular_graph, simulate

__all__ = [
    "ConfigError", "DomainError", "SolverError", "SolveConfig", "SolveResult",
    "solve_affine_bne", "AffinePolicy", "GameParams", "belief", "min_policy",
    "switching_curve", "deviation_gain", "make_regular_graph", "simulate",
]
