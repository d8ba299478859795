"""Reference multiple-access schemes and exposure-backoff heuristics.

Every scheme runs through the same covariance engine with a different
interference pattern, rate weighting and effective noise: successive decoding
without rate splitting (one layer per user), treat-interference-as-noise, and
the two orthogonal schemes where each user gets a 1/K share of the resource.
"""

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .de import de_ee
from .model import (ChannelStats, CovarianceSet, DecodingOrder, InterferencePattern,
                    SystemConfig, sar_values)
from .optimizer import (RateProblem, SolveResult, SolverConfig, initial_covariances,
                        solve_problem)
from .ordering import single_user_rate

__all__ = ["BaselineScheme", "baseline_rate", "solve_baseline",
           "BackoffResult", "adaptive_backoff", "worst_case_backoff"]


class BaselineScheme(str, Enum):
    NOMA = "noma"   # successive decoding, no rate splitting
    SDMA = "sdma"   # all interference treated as noise
    FDMA = "fdma"   # 1/K of the band each, noise scaled accordingly
    TDMA = "tdma"   # 1/K of the time each


def _single_layer_config(config: SystemConfig) -> SystemConfig:
    return replace(config, num_layers=1)


def _greedy_user_order(stats, config, constraints, solver) -> DecodingOrder:
    rates = [single_user_rate(stats, config, constraints, k, solver)
             for k in range(config.num_users)]
    users = sorted(range(config.num_users), key=lambda k: (-rates[k], k))
    return DecodingOrder.from_user_sequence(users, 1)


def _scheme_problem(scheme: BaselineScheme, stats: ChannelStats, config: SystemConfig,
                    constraints, order: DecodingOrder | None) -> RateProblem:
    scheme = BaselineScheme(scheme)
    k = config.num_users
    pairs = [(u, 0) for u in range(k)]
    sar = tuple(tuple(c) for c in constraints) if constraints else ((),) * k
    noise = config.noise_power_w
    weights = {}
    if scheme is BaselineScheme.NOMA:
        pattern = order if order is not None else DecodingOrder.from_user_sequence(range(k), 1)
    elif scheme is BaselineScheme.SDMA:
        pattern = InterferencePattern.full(pairs)
    elif scheme is BaselineScheme.FDMA:
        pattern = InterferencePattern.none(pairs)
        weights = {p: 1.0 / k for p in pairs}
        noise = config.noise_power_w / k    # per-subband noise in a 1/K band
    else:
        pattern = InterferencePattern.none(pairs)
        weights = {p: 1.0 / k for p in pairs}
    return RateProblem(stats=stats, pattern=pattern, noise_power_w=noise,
                       tx_weight=tuple(config.amplifier_inefficiency),
                       static_power_w=float(sum(config.circuit_power_w) + config.bs_power_w),
                       budgets_w=tuple(config.power_budget_w), sar=sar, weights=weights)


def baseline_rate(scheme: BaselineScheme, stats: ChannelStats, config: SystemConfig,
                  q: CovarianceSet, k: int, order: DecodingOrder | None = None,
                  eps: float = 1e-6, max_iters: int = 500) -> float:
    """Deterministic-equivalent rate of user k under a baseline scheme, nats.

    Orthogonal schemes include their 1/K resource share; the covariance set is
    user-level (one layer per user).
    """
    from .de import de_rates

    problem = _scheme_problem(scheme, stats, config, (), order)
    der = de_rates(stats, q, problem.pattern, problem.noise_power_w, eps, max_iters)
    return problem.weights[(k, 0)] * der.rates[(k, 0)]


def solve_baseline(scheme: BaselineScheme, stats: ChannelStats, config: SystemConfig,
                   constraints=(), solver: SolverConfig | None = None) -> SolveResult:
    """Optimize user-level covariances for one baseline scheme. The consumed
    power model is shared with the main problem, so efficiencies compare
    directly."""
    scheme = BaselineScheme(scheme)
    cfg1 = _single_layer_config(config)
    order = None
    if scheme is BaselineScheme.NOMA:
        order = _greedy_user_order(stats, cfg1, constraints, solver)
    problem = _scheme_problem(scheme, stats, config, constraints, order)
    return solve_problem(problem, solver,
                         report_scale=config.bandwidth_hz / np.log(2.0))


@dataclass
class BackoffResult:
    """Outcome of an exposure-aware power backoff."""

    q: CovarianceSet
    ee_bits_per_joule: float
    alphas: tuple              # per-user backoff factors actually applied
    rates: dict
    inner: SolveResult         # the exposure-unconstrained solve it started from


def _solve_without_sar(stats, order, config, constraints, solver):
    """Exposure-unconstrained solve, started from the same point as the
    constrained problem so the two coincide when no budget is active."""
    full = RateProblem.from_config(stats, order, config, constraints)
    unconstrained = RateProblem.from_config(stats, order, config, ())
    init = initial_covariances(full)
    return solve_problem(unconstrained, solver, init=init,
                         report_scale=config.bandwidth_hz / np.log(2.0))


def adaptive_backoff(stats: ChannelStats, config: SystemConfig, constraints, order,
                     solver: SolverConfig | None = None) -> BackoffResult:
    """Solve without exposure budgets, then shrink each user's covariances by
    the factor that restores its tightest exposure budget."""
    base = _solve_without_sar(stats, order, config, constraints, solver)
    exposures = sar_values(constraints, base.q)
    alphas = []
    for k in range(config.num_users):
        a = 1.0
        for idx, con in enumerate(constraints[k] if constraints else ()):
            v = exposures[(k, idx)]
            if v > 0:
                a = min(a, con.budget_w_per_kg / v)
        alphas.append(min(1.0, a))
    q = base.q.scale_users(alphas)
    ee = de_ee(config, stats, q, order)
    return BackoffResult(q=q, ee_bits_per_joule=ee.ee_bits_per_joule,
                         alphas=tuple(alphas), rates=ee.rates, inner=base)


def worst_case_backoff(stats: ChannelStats, config: SystemConfig, constraints, order,
                       solver: SolverConfig | None = None) -> BackoffResult:
    """Back off the power budgets by the worst exposure any feasible transmit
    strategy could cause, then solve without exposure budgets.

    The worst case is max over (user, region) of P_max,k * lambda_max(R_{k,a}),
    available in closed form; the resulting covariances satisfy every exposure
    budget by construction.
    """
    worst = 0.0
    for k in range(config.num_users):
        for con in (constraints[k] if constraints else ()):
            lam_max = float(np.linalg.eigvalsh(con.matrix)[-1])
            worst = max(worst, config.power_budget_w[k] * lam_max)
    alpha = 1.0
    if worst > 0:
        for k in range(config.num_users):
            for con in (constraints[k] if constraints else ()):
                alpha = min(alpha, con.budget_w_per_kg / worst)
    scaled = replace(config, power_budget_w=tuple(alpha * p for p in config.power_budget_w))
    base = _solve_without_sar(stats, order, scaled, constraints, solver)
    ee = de_ee(config, stats, base.q, order)
    return BackoffResult(q=base.q, ee_bits_per_joule=ee.ee_bits_per_joule,
                         alphas=(alpha,) * config.num_users, rates=ee.rates, inner=base)
