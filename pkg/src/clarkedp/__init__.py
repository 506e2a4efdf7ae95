"""Clarke calculus, value iteration and envelope-relation checks for one-dimensional dynamic programs."""

from .errors import (ClarkeDPError, DomainEscape, EmptyFeasible, EstimatorInconsistent,
                     MaxIterExceeded, NoCompactBound, NonFinite, NotConvex, SchemaError,
                     TooLarge, UntrustedRegion)
from .nonsmooth import (DEFAULT_TOL, NEG_INF, DirDerivEstimate, Interval, SamplingSchedule,
                        ScalarMap1, Verdict, clarke_interval, classical_dir_deriv,
                        convex_subdifferential, dir_deriv_lower, dir_deriv_upper,
                        dir_deriv_upper_2d, is_regular, is_strongly_differentiable,
                        lipschitz_lower_bound, stationarity_check, superdifferential_interval)
from .dp import (W_FLOOR, Grid, InnerConfig, PolicySet, ReducedFormModel, ScalarMap2,
                 SolveReport, ValueFunction, bellman_apply, bellman_residual, extract_policy,
                 finite_horizon_oracle, maximizer_sets, oracle_sandwich, simulate_path,
                 solve_value_iteration, uhc_probe)
from .models import (AK, CRRA, CobbDouglas, Custom, Kinked, RCKSpec, TechnologySpec,
                     analytic_log_cobb_douglas, build_rck, compactify, crra_utility,
                     feasibility_floor, kinked_utility, load_spec, piecewise_linear_rule,
                     spec_from_dict, transition_map, utility_map)
from .envelope import (AuditReport, EnvelopeReport, bs_smooth_check, clarke_of_value,
                       clarke_of_w_in_x, envelope_inclusion_check, hypothesis_audit,
                       strong_diff_value_check, sweep, value_schedule, verify_point)

__version__ = "0.1.0"
