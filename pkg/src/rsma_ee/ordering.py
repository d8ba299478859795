"""Decoding-order selection: greedy by single-user rates, or exhaustive search.

The greedy rule decodes stronger users first: streams that land early in the
sequence get their interference cancelled for everyone decoded after them, so
the users able to sustain the highest solo rates take the front slots.
"""

from dataclasses import dataclass
from itertools import permutations
from math import factorial

import numpy as np

from .model import ChannelStats, DecodingOrder, SystemConfig
from .optimizer import (RateProblem, SolveResult, SolverConfig, solve_inner,
                        solve_problem)

__all__ = ["OrderingResult", "single_user_rate", "greedy_order",
           "exhaustive_order", "solve", "EXHAUSTIVE_CAP"]

# (K*L)! beyond this is refused rather than silently attempted
EXHAUSTIVE_CAP = 40320


def single_user_rate(stats: ChannelStats, config: SystemConfig, constraints,
                     k: int, solver: SolverConfig | None = None) -> float:
    """Best achievable solo rate of user k (everyone else silent), nats.

    Sum-rate maximization over one covariance under the user's own power and
    exposure budgets: the efficiency machinery with zero transmit-power weight
    and a unit denominator.
    """
    sub_stats = ChannelStats(coupling=(stats.coupling[k],), bs_basis=stats.bs_basis,
                             user_basis=(stats.user_basis[k],))
    sar = (tuple(constraints[k]),) if constraints else ((),)
    problem = RateProblem(stats=sub_stats, pattern=DecodingOrder.identity(1, 1),
                          noise_power_w=config.noise_power_w, tx_weight=(0.0,),
                          static_power_w=1.0, budgets_w=(config.power_budget_w[k],),
                          sar=sar)
    result = solve_problem(problem, solver, report_scale=1.0)
    return float(result.objective_nats_per_watt)


def greedy_order(stats: ChannelStats, config: SystemConfig, constraints,
                 solver: SolverConfig | None = None) -> DecodingOrder:
    """Users sorted by descending single-user rate (ties broken by ascending
    user index), each user's layers kept contiguous in layer order."""
    rates = [single_user_rate(stats, config, constraints, k, solver)
             for k in range(config.num_users)]
    users = sorted(range(config.num_users), key=lambda k: (-rates[k], k))
    return DecodingOrder.from_user_sequence(users, config.num_layers)


def exhaustive_order(stats: ChannelStats, config: SystemConfig, constraints,
                     solver: SolverConfig | None = None):
    """Solve every decoding permutation and keep the best.

    Returns (order, SolveResult). Ties keep the lexicographically smallest
    sequence; instances with (K*L)! beyond the cap are refused.
    """
    pairs = sorted(config.pairs)
    if factorial(len(pairs)) > EXHAUSTIVE_CAP:
        raise ValueError(f"exhaustive search over {len(pairs)}! permutations "
                         f"exceeds the cap of {EXHAUSTIVE_CAP}")
    best = None
    for seq in permutations(pairs):
        order = DecodingOrder(seq)
        result = solve_inner(stats, order, config, constraints, solver)
        if best is None or result.ee_bits_per_joule > best[1].ee_bits_per_joule:
            best = (order, result)
    return best


@dataclass
class OrderingResult:
    """Solution of the joint order + covariance problem."""

    order: DecodingOrder
    result: SolveResult
    method: str
    single_user_rates: tuple | None = None

    @property
    def ee_bits_per_joule(self) -> float:
        return self.result.ee_bits_per_joule

    @property
    def q(self):
        return self.result.q

    @property
    def rates(self) -> dict:
        return self.result.rates

    @property
    def iterations(self) -> dict:
        return self.result.iterations


def solve(stats: ChannelStats, config: SystemConfig, constraints=(),
          method: str = "greedy", solver: SolverConfig | None = None,
          fixed_order: DecodingOrder | None = None) -> OrderingResult:
    """Pick a decoding order by `method` (greedy, exhaustive or fixed) and
    optimize the covariances under it."""
    if method == "greedy":
        rates = tuple(single_user_rate(stats, config, constraints, k, solver)
                      for k in range(config.num_users))
        users = sorted(range(config.num_users), key=lambda k: (-rates[k], k))
        order = DecodingOrder.from_user_sequence(users, config.num_layers)
        result = solve_inner(stats, order, config, constraints, solver)
        return OrderingResult(order=order, result=result, method=method,
                              single_user_rates=rates)
    if method == "exhaustive":
        order, result = exhaustive_order(stats, config, constraints, solver)
        return OrderingResult(order=order, result=result, method=method)
    if method == "fixed":
        if fixed_order is None:
            raise ValueError("method 'fixed' needs fixed_order")
        result = solve_inner(stats, fixed_order, config, constraints, solver)
        return OrderingResult(order=fixed_order, result=result, method=method)
    raise ValueError(f"unknown ordering method: {method!r}")
