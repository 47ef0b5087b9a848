"""Discrete solvers, seeds and barriers."""
from .barriers import (Barrier, BarrierAudit, barrier_eval, radial_super_max_cbar,
                       slab_min_A)
from .common import (BarrierRegimeError, BoundaryData, SeedParameterError, SolveReport,
                     SolverConfig, SolverError, optimal_omega)
from .degenerate import solve_degenerate
from .perron import (check_seed_parameters, default_seed_parameters, holder_seminorm,
                     inf_convolution, perron_envelope, subsolution_seed,
                     supersolution_audit, supersolution_seed)
from .variational import solve_alt_phillips, solve_obstacle

__all__ = [
    "Barrier", "BarrierAudit", "barrier_eval", "radial_super_max_cbar", "slab_min_A",
    "BarrierRegimeError", "BoundaryData", "SeedParameterError", "SolveReport",
    "SolverConfig", "SolverError", "optimal_omega", "solve_degenerate",
    "check_seed_parameters", "default_seed_parameters", "holder_seminorm",
    "inf_convolution", "perron_envelope", "subsolution_seed", "supersolution_audit",
    "supersolution_seed", "solve_alt_phillips", "solve_obstacle",
]
