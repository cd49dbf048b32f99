"""Regularized Newton method with power-norm and l1 step penalties.

Solver, parameter schedules, and certification tools for the family of
methods whose step solves

    min_d  <grad f(x), d> + 0.5 <hess f(x) d, d> + (mu/p) ||d||^p + rho ||d||_1

with p in (1, 3].  Includes global-rate and local-order checks that audit a
recorded run against the guarantees the schedules are designed to meet.
"""

from .kernels import backend
from .oracle import ProblemMetadata, make_logistic, make_logsumexp, make_quadratic
from .schedule import ScheduleConfig, mu_rho, preset, rate_constants, validate_assumptions
from .solver import SolverConfig, Trajectory, run
from .subproblem import SubproblemInstance, SubproblemSolution, solve

__all__ = [
    "ProblemMetadata",
    "ScheduleConfig",
    "SolverConfig",
    "SubproblemInstance",
    "SubproblemSolution",
    "Trajectory",
    "backend",
    "make_logistic",
    "make_logsumexp",
    "make_quadratic",
    "mu_rho",
    "preset",
    "rate_constants",
    "run",
    "solve",
    "validate_assumptions",
]

__version__ = "0.1.0"
