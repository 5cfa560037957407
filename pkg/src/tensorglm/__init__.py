"""Information-theoretic limits of spiked tensor estimation with a GLM-structured spike."""

from .activation import Activation, output_mi, output_mi_dq, output_mi_dr, rho_x
from .errors import (ConfigError, DerivativeSignWarning, InvalidArgumentError, NearDegenerateWarning,
                     NumericDomainError, SolverDivergenceError, TensorGLMError, UnsupportedPriorError,
                     UnsupportedSizeError)
from .observables import (LambdaC, PhasePoint, SweepGrid, detect_lambda_c, limit_curve, sweep_lambda,
                          sweep_phase_diagram)
from .oracle import (immse_check, mc_estimates, mc_mutual_information, mc_tensor_mmse, posterior_weights,
                     sample_instance)
from .potential import ModelParams, OverlapPoint, psi, psi_limit, psi_tilde, tensor_term
from .prior import Prior, scalar_mi, scalar_mmse, solve_rs
from .quadrature import QuadratureRule, expect_gaussian, gauss_hermite_rule
from .solver import (FixedPointConfig, SolveResult, fixed_point_step, mutual_information, solve_limit,
                     solve_variational, tensor_mmse)

__version__ = "0.1.0"

__all__ = [
    "Activation", "ConfigError", "DerivativeSignWarning", "FixedPointConfig", "InvalidArgumentError",
    "LambdaC", "ModelParams", "NearDegenerateWarning", "NumericDomainError", "OverlapPoint", "PhasePoint",
    "Prior", "QuadratureRule", "SolveResult", "SolverDivergenceError", "SweepGrid", "TensorGLMError",
    "UnsupportedPriorError", "UnsupportedSizeError", "detect_lambda_c", "expect_gaussian",
    "fixed_point_step", "gauss_hermite_rule", "immse_check", "limit_curve", "mc_estimates",
    "mc_mutual_information", "mc_tensor_mmse", "mutual_information", "output_mi", "output_mi_dq",
    "output_mi_dr", "posterior_weights", "psi", "psi_limit", "psi_tilde", "rho_x", "sample_instance",
    "scalar_mi", "scalar_mmse", "solve_limit", "solve_rs", "solve_variational", "sweep_lambda",
    "sweep_phase_diagram", "tensor_mmse", "tensor_term",
]
