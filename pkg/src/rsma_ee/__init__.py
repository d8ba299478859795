"""Energy-efficient uplink rate-splitting: covariance and decoding-order design
under per-user power and electromagnetic exposure budgets.

Transmit covariances are optimized against a deterministic equivalent of the
ergodic rates, validated by Monte-Carlo estimators, with baseline access
schemes and exposure backoffs for comparison.
"""

from .baselines import (BackoffResult, BaselineScheme, adaptive_backoff,
                        baseline_rate, solve_baseline, worst_case_backoff)
from .channels import load_channel_stats, save_channel_stats, synthetic_stats
from .de import (DEParams, DERates, de_ee, de_fixed_point, de_rate_plus,
                 de_rates, rate_minus)
from .linalg import dft_matrix
from .model import (ChannelStats, CovarianceSet, DecodingOrder, FeasibilityReport,
                    InterferencePattern, SARConstraint, SystemConfig, check_feasible,
                    interference_cov, make_sar_constraints, power_consumption,
                    sar_values, theta, theta_tilde)
from .montecarlo import ChannelSample, ee_mc, ergodic_rate_mc, sample_channels
from .optimizer import (DualState, MMGradientSet, RateProblem, SolveResult,
                        SolverConfig, auxiliary_S, dinkelbach_eta, dual_step,
                        initial_covariances, mm_gradients, solve_inner,
                        solve_problem, surrogate_objective, water_fill)
from .ordering import (OrderingResult, exhaustive_order, greedy_order,
                       single_user_rate, solve)

__version__ = "0.1.0"

__all__ = [
    "SystemConfig", "ChannelStats", "SARConstraint", "DecodingOrder",
    "InterferencePattern", "CovarianceSet", "FeasibilityReport", "dft_matrix",
    "theta", "theta_tilde", "interference_cov", "power_consumption", "sar_values",
    "check_feasible", "make_sar_constraints", "synthetic_stats",
    "load_channel_stats", "save_channel_stats", "ChannelSample", "sample_channels",
    "ergodic_rate_mc", "ee_mc", "DEParams", "DERates", "de_fixed_point",
    "de_rate_plus", "rate_minus", "de_rates", "de_ee", "SolverConfig", "DualState",
    "MMGradientSet", "RateProblem", "SolveResult", "mm_gradients",
    "surrogate_objective", "dinkelbach_eta", "auxiliary_S", "water_fill",
    "dual_step", "initial_covariances", "solve_inner", "solve_problem",
    "OrderingResult", "single_user_rate", "greedy_order", "exhaustive_order",
    "solve", "BaselineScheme", "BackoffResult", "baseline_rate", "solve_baseline",
    "adaptive_backoff", "worst_case_backoff",
]
