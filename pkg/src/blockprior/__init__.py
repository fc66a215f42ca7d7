"""Block-sparse recovery with prior block-support information.

Measurement bounds from conic geometry, optimal weights for the weighted
group-norm program, their robustness to misreported accuracies, a
splitting solver for the recovery program itself, and a Monte-Carlo
harness that verifies the theory end to end.
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .bounds import (BoundEvaluation, bound_objective, bound_objective_weighted,
                     measurement_bound, measurement_bound_weighted,
                     measurement_thresholds, minimize_separable, per_set_bound,
                     required_measurements, separable_objective)
from .errors import (ConfigError, DomainError, FactorizationError,
                     NumericalError, UnboundedWeightError)
from .model import (BlockStructure, MeasurementEnsemble, PriorPartition,
                    SignalInstance, derive_seed, expand_weights, make_ensemble,
                    sample_gaussian_operator, sample_instance)
from .solver import (RecoveryOutcome, SolverConfig, block_shrink, certify_optimal,
                     dual_group_norm, recover, recovery_success,
                     weighted_group_norm)
from .specfun import (chi_norm_const, gamma_upper, tail_moment0, tail_moment1,
                      tail_moment2)
from .weights import (OptimalWeights, optimal_weight, optimal_weights,
                      weight_equation_residual, weight_sensitivity,
                      weight_sensitivity_at)

__all__ = [
    "BACKEND", "__version__",
    "BlockStructure", "BoundEvaluation", "ConfigError", "DomainError",
    "FactorizationError", "MeasurementEnsemble", "NumericalError",
    "OptimalWeights", "PriorPartition", "RecoveryOutcome", "SignalInstance",
    "SolverConfig", "UnboundedWeightError",
    "block_shrink", "bound_objective", "bound_objective_weighted",
    "certify_optimal", "chi_norm_const", "derive_seed", "dual_group_norm",
    "expand_weights", "gamma_upper", "make_ensemble", "measurement_bound",
    "measurement_bound_weighted", "measurement_thresholds",
    "minimize_separable", "optimal_weight", "optimal_weights", "per_set_bound",
    "recover", "recovery_success", "required_measurements",
    "sample_gaussian_operator", "sample_instance", "separable_objective",
    "tail_moment0", "tail_moment1", "tail_moment2", "weight_equation_residual",
    "weight_sensitivity", "weight_sensitivity_at", "weighted_group_norm",
]
