"""Solver toolkit for optimal portfolio-consumption under exponential OU dynamics.

The pipeline: validate the market model, integrate the Riccati and linear
coefficient ODEs backward from the horizon with exponential-Rosenbrock /
Runge-Kutta pairs, reconstruct the value function and feedback policy,
certify optimality through eigenvalue conditions, and cross-check against a
closed-form benchmark, a finite difference reference and Monte Carlo
simulation.
"""

__version__ = "0.1.0"

from .benchmark import (DecoupledParams, ResolutionTooCoarse, benchmark_table,
                        f0_closed, f_closed, g_closed, phi_reference_1d)
from .coeffs import (RK2_MIDPOINT, RK3_KUTTA, CoeffRhs, CoefficientPath,
                     MissingStageValue, RkTableau, rhs_F, rhs_F0,
                     solve_coefficients)
from .fdm1d import FdmGrid, SingularSystem, solve_fdm_1d
from .market import (DerivedConstants, DimensionMismatch, GammaOutOfRange,
                     ModelError, ModelParams, NonPositiveAlpha, SingularSigma,
                     field_H, validate)
from .montecarlo import (MissingPhi, NonFinitePath, Policy, SimulationEnsemble,
                         mean_utility, numerical_policy, path_utilities,
                         policy_library, simulate_paths)
from .riccati import (RiccatiGrid, RiccatiRhs, StepTooLarge, erow3_step,
                      exp_euler_step, frechet_apply, phi_apply, solve_riccati)
from .valuation import (NonPositiveWealth, PhiEvaluator, PhiOverflow,
                        PhiUnderflow, pde_residual_1d)
from .verification import (EigenFailure, OUMoments, VerificationReport,
                           check_conditions, check_novikov_surrogate,
                           growth_matrix, ou_moments)

__all__ = [
    "ModelParams", "DerivedConstants", "validate", "field_H",
    "ModelError", "DimensionMismatch", "NonPositiveAlpha", "SingularSigma",
    "GammaOutOfRange",
    "RiccatiRhs", "RiccatiGrid", "solve_riccati", "exp_euler_step", "erow3_step",
    "frechet_apply", "phi_apply", "StepTooLarge",
    "RkTableau", "RK2_MIDPOINT", "RK3_KUTTA", "CoeffRhs", "CoefficientPath",
    "rhs_F", "rhs_F0", "solve_coefficients", "MissingStageValue",
    "DecoupledParams", "g_closed", "f_closed", "f0_closed", "benchmark_table",
    "phi_reference_1d", "ResolutionTooCoarse",
    "PhiEvaluator", "pde_residual_1d", "PhiOverflow", "PhiUnderflow",
    "NonPositiveWealth",
    "OUMoments", "ou_moments", "check_conditions", "check_novikov_surrogate",
    "growth_matrix", "VerificationReport", "EigenFailure",
    "FdmGrid", "solve_fdm_1d", "SingularSystem",
    "Policy", "SimulationEnsemble", "simulate_paths", "mean_utility",
    "path_utilities", "policy_library", "numerical_policy", "MissingPhi",
    "NonFinitePath",
]
