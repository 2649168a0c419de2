"""Spectral recovery of initial states in semilinear parabolic problems
from nonlocal-in-time observations."""

from .errors import (AdmissibilityError, ConfigError, IllPosedModeError,
                     InvalidParameterError, NumericFailureError, SpecrecError)
from .spectral import (FractionalNormSpec, SpectralOperator, TimeGrid,
                       Trajectory, analyze, build_fourth_order,
                       build_second_order, default_grading, default_shift,
                       diagonal_operator, fractional_norm, make_graded_grid,
                       semigroup_apply, synthesize, weighted_sup_norm)
from .kernels import (ConstantWeight, ModeWeights, PolynomialWeight,
                      TabulatedWeight, WeightFunction, beta_function,
                      exp_weight_integral, mode_weights,
                      phi_T_inverse_diagonal, tail_weight)
from .nonlinearity import (MemoryKernel, Nonlinearity, PowerLaw, Zero,
                           check_growth_condition, check_kernel_admissibility,
                           eval_local, eval_memory_kernel)
from .duhamel import duhamel_convolve, forward_solve, observe, phi1
from .recover import (ConditionE, ConditionE100, ConditionE200,
                      FixedPointReport, GrowthExponents, NonlocalCondition,
                      WellPosednessEstimate, apply_psi_E,
                      check_spectral_condition, picard_recover, sigma_E,
                      sigma_E100, sigma_E200, theoretical_threshold)
from .config import ExperimentConfig, config_from_dict, emit_csv, emit_json, parse_config
from .harness import (RoundTripResult, SweepRow, roundtrip,
                      sweep_threshold, synthesize_observation)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
