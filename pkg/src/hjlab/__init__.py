"""hjlab: a numerical laboratory for Hamilton-Jacobi Cauchy problems.

Computes viscosity solutions through the variational formula, traces
classical and generalized characteristics, tests proximal subdifferentials
of the initial datum, and classifies how singularities are generated from
the initial time.
"""

from .errors import (BoundaryExitError, ConfigError, ConvergenceError,
                     DomainError, HJLabError, InconsistencyError,
                     NumericalError, ShootingError, TheoremViolationError)
from .hamiltonian import (Box, HamiltonianModel, LegendreResult, cube,
                          dual_momentum, eikonal_model, eval_h, generic_model,
                          grads_h, legendre, quadratic_model, velocity_sup)
from .flow import (PhaseArc, ShootResult, SpeedBound, integrate_flow,
                   shoot_bvp, speed_bound)
from .action import (ActionRegime, ActionResult, action_batch, action_value,
                     check_action_c11, check_action_convexity, default_regime,
                     direct_minimizer_action)
from .value import (DEFAULT_CONFIG, InitialDatum, Minimizer, MinimizerSet,
                    ValueConfig, ValueField, hopf_1d, is_singular, solve_grid,
                    superdiff_x, value_at)
from .subdiff import (ProximalCertificate, SubdiffEstimate,
                      default_momentum_grid, estimate_proximal_subdifferential,
                      geometric_samples, gradient_candidates, k_ladder,
                      test_proximal_subgradient, uniform_k_check)
from .chartrace import (CharacteristicTrace, classical_char_from_subgradient,
                        classify_trace, extract_subgradient_from_char,
                        generalized_char, measure_intersection_time,
                        minimal_norm_point, probe_window,
                        singular_char_from_empty_subdiff)
from . import scenarios

__version__ = "0.1.0"
