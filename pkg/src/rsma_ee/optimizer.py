"""Energy-efficiency maximization over transmit covariances for a fixed decoding order.

Four nested loops, outermost first:
  relinearization of the concave interference penalty (minorize-maximize),
  fractional-program updates of the efficiency ratio (Dinkelbach),
  projected-subgradient ascent on the power/exposure multipliers,
  alternating optimization between fixed-point rate parameters and a
  closed-form modified water-filling step per stream.

Every update keeps the best feasible iterate of its parametric objective, so
the efficiency trace is non-decreasing by construction and the returned
covariances always satisfy the constraints to tolerance.
"""

from dataclasses import dataclass, field

import numpy as np

from .de import de_fixed_point, de_rates
from .linalg import herm, psd_inv_sqrt
from .model import (ChannelStats, CovarianceSet, Pair, SystemConfig,
                    check_feasible, interference_cov_diag, power_consumption)

__all__ = [
    "SolverConfig", "DualState", "MMGradientSet", "AuxiliaryMatrix", "RateProblem",
    "SolveResult", "mm_gradients", "surrogate_objective", "dinkelbach_eta",
    "auxiliary_S", "water_fill", "dual_step", "initial_covariances", "solve_inner",
    "solve_problem",
]

S_EIG_FLOOR = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and iteration caps for the nested solver loops."""

    eps_fixed_point: float = 1e-6    # fixed-point residual, squared Frobenius
    eps_dinkelbach: float = 1e-4     # relative |eta change| between ratio updates
    eps_mm: float = 1e-4             # relative |EE change| between relinearizations
    eps_inner: float = 1e-5          # relative |EE change| inside alternating opt
    max_inner: int = 100             # I1, water-filling passes per dual step
    max_dual: int = 200              # I2, subgradient steps per Dinkelbach update
    max_mm: int = 50                 # I3, relinearizations
    max_dinkelbach: int = 50         # I4, ratio updates per relinearization
    max_fixed_point: int = 500
    dual_tol: float = 1e-6           # violation / multiplier movement threshold
    dual_stall: int = 10             # consecutive quiet steps before stopping
    feas_tol: float = 1e-6           # relative budget tolerance for "feasible"


@dataclass(frozen=True)
class DualState:
    """Multipliers for the per-user power budgets (mu) and exposure budgets
    (lam, one per (user, region)), plus the current efficiency ratio eta."""

    mu: tuple
    lam: tuple
    eta: float = 0.0
    step: int = 0

    @classmethod
    def zeros(cls, num_users: int, sar_counts) -> "DualState":
        return cls(mu=(0.0,) * num_users,
                   lam=tuple((0.0,) * c for c in sar_counts))


@dataclass(frozen=True)
class RateProblem:
    """A weighted-sum-of-rates-over-power maximization instance.

    Covers the main problem (weights 1, consumed power in the denominator) and
    the orthogonal / sum-rate variants (fractional weights, unit denominator).
    """

    stats: ChannelStats
    pattern: object                   # DecodingOrder or InterferencePattern
    noise_power_w: float
    tx_weight: tuple                  # xi_k per user; zeros for sum-rate mode
    static_power_w: float             # circuit + BS power; 1.0 for sum-rate mode
    budgets_w: tuple                  # P_max,k
    sar: tuple                        # per-user tuples of SARConstraint
    weights: dict = field(default_factory=dict)   # pair -> rate weight, default 1

    def __post_init__(self):
        if any(b <= 0 for b in self.budgets_w):
            raise ValueError("power budgets must be positive")
        w = {p: float(self.weights.get(p, 1.0)) for p in self.pattern.pairs}
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_config(cls, stats: ChannelStats, order, config: SystemConfig,
                    constraints=()) -> "RateProblem":
        sar = tuple(tuple(c) for c in constraints) if constraints else ((),) * config.num_users
        return cls(stats=stats, pattern=order, noise_power_w=config.noise_power_w,
                   tx_weight=tuple(config.amplifier_inefficiency),
                   static_power_w=float(sum(config.circuit_power_w) + config.bs_power_w),
                   budgets_w=tuple(config.power_budget_w), sar=sar)

    @property
    def pairs(self) -> tuple:
        return self.pattern.pairs

    def user_pairs(self, k: int) -> tuple:
        return tuple(p for p in self.pairs if p[0] == k)

    def power(self, q: CovarianceSet) -> float:
        return float(self.static_power_w
                     + sum(x * q.user_power(k) for k, x in enumerate(self.tx_weight)))

    def budget_norm(self) -> float:
        vec = list(self.budgets_w) + [c.budget_w_per_kg for row in self.sar for c in row]
        return float(np.linalg.norm(vec))


# ---------------------------------------------------------------------------
# Minorization: gradients of the interference penalty at a reference point.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MMGradientSet:
    """Gradients of each stream's logdet interference penalty at q_ref.

    grads[(target, source)] is the derivative of logdet K_target with respect
    to Q_source; it depends on the source user only, not the source layer.
    grads_plus holds the matching derivative of the target's pre-cancellation
    rate term, which also grows with interference. rminus_ref holds
    logdet K_target at the reference point.
    """

    grads: dict
    grads_plus: dict
    rminus_ref: dict
    q_ref: CovarianceSet
    pattern: object
    stats: ChannelStats
    noise_power_w: float

    def penalty(self, pair: Pair, weights: dict | None = None) -> np.ndarray:
        """Sum of gradients over the streams that see `pair` as interference."""
        n = self.stats.user_antennas(pair[0])
        total = np.zeros((n, n), dtype=complex)
        for target in self.pattern.affected(pair):
            w = 1.0 if weights is None else weights.get(target, 1.0)
            total = total + w * self.grads[(target, pair)]
        return total

    def penalty_net(self, pair: Pair, weights: dict | None = None) -> np.ndarray:
        """First-order net harm of `pair` on the affected streams.

        The raw penalty gradient overstates the harm because the affected
        streams' pre-cancellation terms rise with interference too; the net
        price is the difference of the two gradients (still PSD entrywise).
        """
        n = self.stats.user_antennas(pair[0])
        total = np.zeros((n, n), dtype=complex)
        for target in self.pattern.affected(pair):
            w = 1.0 if weights is None else weights.get(target, 1.0)
            total = total + w * (self.grads[(target, pair)]
                                 - self.grads_plus[(target, pair)])
        return total


def mm_gradients(stats: ChannelStats, q_ref: CovarianceSet, order,
                 noise_power_w: float) -> MMGradientSet:
    """Linearize every stream's interference penalty at q_ref.

    The gradient with respect to an interfering stream of user p is
    V_p Theta_p(K^{-1}) V_p^H, shared by all of that user's layers; the
    pre-cancellation counterpart replaces K^{-1} with (gamma_tilde + K)^{-1}.
    """
    grads = {}
    grads_plus = {}
    rminus = {}
    for target in order.pairs:
        kdiag = interference_cov_diag(stats, q_ref, order, target, noise_power_w)
        rminus[target] = float(np.sum(np.log(kdiag)))
        kinv = 1.0 / kdiag
        params = de_fixed_point(stats, q_ref, order, target, noise_power_w)
        kpinv = 1.0 / (params.gamma_tilde_diag + kdiag)
        per_user = {}
        for source in order.interferers(target):
            p = source[0]
            if p not in per_user:
                v = stats.user_basis[p]
                d = stats.coupling[p].T @ kinv
                dp = stats.coupling[p].T @ kpinv
                per_user[p] = (herm((v * d) @ v.conj().T),
                               herm((v * dp) @ v.conj().T))
            grads[(target, source)] = per_user[p][0]
            grads_plus[(target, source)] = per_user[p][1]
    return MMGradientSet(grads=grads, grads_plus=grads_plus, rminus_ref=rminus,
                         q_ref=q_ref, pattern=order, stats=stats,
                         noise_power_w=noise_power_w)


def surrogate_objective(q: CovarianceSet, q_ref: CovarianceSet, grads: MMGradientSet,
                        rates_plus: dict, weights: dict | None = None) -> float:
    """Minorant of the weighted sum rate at q, built from the linearized penalty.

    Per stream: rate_plus(q) - rminus(q_ref) - sum over interferers of
    tr(grad (Q - Q_ref)). Tangent at q = q_ref, below the true rate elsewhere.
    """
    total = 0.0
    for target in grads.pattern.pairs:
        w = 1.0 if weights is None else weights.get(target, 1.0)
        lin = 0.0
        for source in grads.pattern.interferers(target):
            delta = q[source] - q_ref[source]
            lin += float(np.real(np.trace(grads.grads[(target, source)] @ delta)))
        total += w * (rates_plus[target] - grads.rminus_ref[target] - lin)
    return total


def dinkelbach_eta(q: CovarianceSet, q_ref: CovarianceSet, grads: MMGradientSet,
                   config: SystemConfig, solver: SolverConfig | None = None) -> float:
    """Ratio update: surrogate sum rate over consumed power, clamped at zero."""
    solver = solver or SolverConfig()
    der = de_rates(grads.stats, q, grads.pattern, grads.noise_power_w,
                   solver.eps_fixed_point, solver.max_fixed_point)
    num = surrogate_objective(q, q_ref, grads, der.rates_plus)
    return max(0.0, num / power_consumption(config, q))


# ---------------------------------------------------------------------------
# Per-stream subproblem: auxiliary matrix and modified water-filling.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AuxiliaryMatrix:
    matrix: np.ndarray
    degenerate: bool


def _assemble_s(pair: Pair, grads: MMGradientSet, dual: DualState, tx_weight,
                sar, weights=None, net=False) -> np.ndarray:
    k = pair[0]
    n = grads.stats.user_antennas(k)
    s = grads.penalty_net(pair, weights) if net else grads.penalty(pair, weights)
    s = s + (dual.eta * tx_weight[k] + dual.mu[k]) * np.eye(n, dtype=complex)
    for lam, con in zip(dual.lam[k], sar[k]):
        if lam != 0.0:
            s = s + lam * con.matrix
    return herm(s)


def _floor_eigs(s: np.ndarray) -> AuxiliaryMatrix:
    w, v = np.linalg.eigh(herm(s))
    degenerate = bool(w.min() < S_EIG_FLOOR)
    if degenerate:
        s = (v * np.maximum(w, S_EIG_FLOOR)) @ v.conj().T
    return AuxiliaryMatrix(matrix=herm(s), degenerate=degenerate)


def auxiliary_S(pair: Pair, grads: MMGradientSet, dual: DualState,
                config: SystemConfig, constraints) -> AuxiliaryMatrix:
    """Price matrix of one stream's subproblem: linearized interference caused
    to earlier streams, plus (eta xi_k + mu_k) I, plus the exposure terms.

    Symmetrized; eigenvalues floored at 1e-10. A floor hit marks the matrix
    degenerate (possible only when eta, mu and lambda all vanish).
    """
    sar = tuple(tuple(c) for c in constraints) if constraints else ((),) * config.num_users
    s = _assemble_s(pair, grads, dual, tuple(config.amplifier_inefficiency), sar)
    return _floor_eigs(s)


def water_fill(s_matrix: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Maximize logdet(I + gamma Q) - tr(S Q) over PSD Q, in closed form.

    Eigenmodes of S^{-1/2} gamma S^{-1/2} above water level 1 are filled with
    1 - 1/eigenvalue; the rest stay empty.
    """
    s_isqrt = psd_inv_sqrt(s_matrix)
    g = herm(s_isqrt @ np.asarray(gamma, dtype=complex) @ s_isqrt)
    th, u = np.linalg.eigh(g)
    coef = np.where(th > 1.0, 1.0 - 1.0 / np.maximum(th, 1.0), 0.0)
    return herm(s_isqrt @ (u * coef) @ u.conj().T @ s_isqrt)


def dual_step(dual: DualState, q: CovarianceSet, config: SystemConfig,
              constraints) -> DualState:
    """One projected subgradient step on the budget multipliers.

    Step v uses s_v = s_0 / sqrt(v) with s_0 = 1 / (1 + norm of the stacked
    budget vector); multipliers are clamped at zero.
    """
    sar = tuple(tuple(c) for c in constraints) if constraints else ((),) * config.num_users
    vec = list(config.power_budget_w) + [c.budget_w_per_kg for row in sar for c in row]
    s0 = 1.0 / (1.0 + float(np.linalg.norm(vec)))
    return _subgradient_step(dual, q, tuple(config.power_budget_w), sar, s0)


def _subgradient_step(dual: DualState, q: CovarianceSet, budgets, sar, s0) -> DualState:
    v = dual.step + 1
    s = s0 / np.sqrt(v)
    mu = []
    for k, cap in enumerate(budgets):
        mu.append(max(0.0, dual.mu[k] + s * (q.user_power(k) - cap)))
    lam = []
    for k, row in enumerate(sar):
        new_row = []
        for a, con in enumerate(row):
            exposure = sum(float(np.real(np.trace(con.matrix @ q[(k, l)])))
                           for l in range(q.num_layers))
            new_row.append(max(0.0, dual.lam[k][a] + s * (exposure - con.budget_w_per_kg)))
        lam.append(tuple(new_row))
    return DualState(mu=tuple(mu), lam=tuple(lam), eta=dual.eta, step=v)


def initial_covariances(problem: RateProblem, safety: float = 0.9) -> CovarianceSet:
    """Strictly feasible scaled-identity start.

    c_k activates at most `safety` of the tightest of the power budget and the
    exposure budgets of user k.
    """
    num_users = problem.stats.num_users
    layers = {k: len(problem.user_pairs(k)) for k in range(num_users)}
    scales = []
    for k in range(num_users):
        n = problem.stats.user_antennas(k)
        L = max(1, layers[k])
        cap = problem.budgets_w[k] / (L * n)
        for con in problem.sar[k]:
            tr = float(np.real(np.trace(con.matrix)))
            if tr > 0:
                cap = min(cap, con.budget_w_per_kg / (L * tr))
        scales.append(safety * cap)
    blocks = []
    for k in range(num_users):
        n = problem.stats.user_antennas(k)
        row = [scales[k] * np.eye(n, dtype=complex) if (k, l) in set(problem.pairs)
               else np.zeros((n, n), dtype=complex)
               for l in range(max(1, layers[k]))]
        blocks.append(row)
    return CovarianceSet(blocks, clamp=False)


# ---------------------------------------------------------------------------
# Engine.
# ---------------------------------------------------------------------------

@dataclass
class _Eval:
    """DE rates and bookkeeping at one covariance set."""

    rates_plus: dict
    rates_minus: dict
    gammas: dict
    raw_total: float          # weighted sum of unclamped rates, nats
    clamped_total: float
    power: float

    @property
    def ratio(self) -> float:
        return self.raw_total / self.power


def _evaluate(problem: RateProblem, q: CovarianceSet, solver: SolverConfig) -> _Eval:
    der = de_rates(problem.stats, q, problem.pattern, problem.noise_power_w,
                   solver.eps_fixed_point, solver.max_fixed_point)
    w = problem.weights
    raw = sum(w[p] * (der.rates_plus[p] - der.rates_minus[p]) for p in problem.pairs)
    clamped = sum(w[p] * der.rates[p] for p in problem.pairs)
    return _Eval(rates_plus=der.rates_plus, rates_minus=der.rates_minus,
                 gammas={p: der.params[p].gamma for p in problem.pairs},
                 raw_total=float(raw), clamped_total=float(clamped),
                 power=problem.power(q))


def _surrogate_total(problem, grads, q, cache) -> float:
    return surrogate_objective(q, grads.q_ref, grads, cache.rates_plus, problem.weights)


def _parametric_value(problem, grads, eta, q, cache) -> float:
    return _surrogate_total(problem, grads, q, cache) - eta * cache.power


def _violations(problem: RateProblem, q: CovarianceSet) -> float:
    """Largest relative budget violation (0 when feasible)."""
    worst = 0.0
    for k, cap in enumerate(problem.budgets_w):
        worst = max(worst, (q.user_power(k) - cap) / cap)
    for k, row in enumerate(problem.sar):
        for con in row:
            exposure = sum(float(np.real(np.trace(con.matrix @ q[(k, l)])))
                           for l in range(q.num_layers))
            worst = max(worst, (exposure - con.budget_w_per_kg) / con.budget_w_per_kg)
    return max(0.0, worst)


def _feasible_scaling(problem: RateProblem, q: CovarianceSet) -> list:
    """Per-user shrink factors that restore every budget (1 when already met)."""
    alphas = []
    for k, cap in enumerate(problem.budgets_w):
        a = 1.0
        power = q.user_power(k)
        if power > cap:
            a = cap / power
        for con in problem.sar[k]:
            exposure = sum(float(np.real(np.trace(con.matrix @ q[(k, l)])))
                           for l in range(q.num_layers))
            if exposure > con.budget_w_per_kg:
                a = min(a, con.budget_w_per_kg / exposure)
        alphas.append(a)
    return alphas


def _bisect_price(fill, levels, tops, j, budget, upward):
    """Find the price of constraint j landing its level on the budget.

    The level is decreasing in the price; upward searches [tops[j], inf) for a
    violated constraint, downward searches [0, tops[j]] for a priced slack one.
    Returns a price on the feasible side of the boundary.
    """
    def level_at(t):
        trial = list(tops)
        trial[j] = t
        return levels(fill(trial))[j]

    if upward:
        lo = tops[j]
        hi = max(1.0, 2.0 * lo)
        for _ in range(200):
            if level_at(hi) <= budget:
                break
            hi *= 4.0
        else:
            raise RuntimeError("failed to bracket a budget-activating price")
    else:
        lo, hi = 0.0, tops[j]
        if level_at(lo) <= budget:
            return 0.0          # slack even unpriced, drop the top-up
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if level_at(mid) > budget:
            lo = mid
        else:
            hi = mid
    return hi


def _user_fill(problem, solver, user, gammas, s_raw):
    """Water-fill one user's streams at the current prices, then adjust
    non-negative price top-ups by bisection until every budget of the user
    holds and no top-up prices a slack constraint.

    The base multipliers evolve in the outer dual loop; the top-ups keep each
    iterate feasible under the frozen rate parameters and land priced
    constraints on their boundaries (the per-user stationarity condition).
    Returns the blocks and the realized price top-ups.
    """
    pairs = problem.user_pairs(user)
    cons = problem.sar[user]
    tops = [0.0] * (1 + len(cons))
    if not pairs:
        return {}, tops
    n = problem.stats.user_antennas(user)
    eye = np.eye(n, dtype=complex)
    budgets = [problem.budgets_w[user]] + [c.budget_w_per_kg for c in cons]
    mats = [eye] + [c.matrix for c in cons]

    def fill(trial):
        add = np.zeros((n, n), dtype=complex)
        for t, m in zip(trial, mats):
            if t:
                add = add + t * m
        blocks = {}
        for p in pairs:
            w = problem.weights[p]
            if w <= 0.0:
                blocks[p] = np.zeros((n, n), dtype=complex)
                continue
            s = _floor_eigs(s_raw[p] + add).matrix
            blocks[p] = water_fill(s / w, gammas[p])
        return blocks

    def levels(blocks):
        out = [sum(float(np.real(np.trace(b))) for b in blocks.values())]
        for c in cons:
            out.append(sum(float(np.real(np.trace(c.matrix @ b)))
                           for b in blocks.values()))
        return out

    tol = solver.feas_tol
    blocks = fill(tops)
    for _ in range(12):
        rel = [(v - b) / b for v, b in zip(levels(blocks), budgets)]
        j = int(np.argmax(rel))
        if rel[j] > tol:
            tops[j] = _bisect_price(fill, levels, tops, j, budgets[j], upward=True)
        else:
            j = next((i for i, r in enumerate(rel) if tops[i] > 0.0 and r < -tol), None)
            if j is None:
                break
            tops[j] = _bisect_price(fill, levels, tops, j, budgets[j], upward=False)
        blocks = fill(tops)
    return blocks, tops


def _ao_pass(problem, solver, grads, dual, q, cache, eta, val):
    """One Gauss-Seidel sweep: each user's streams are refilled at the current
    prices, then blended toward the fill with backtracking so the parametric
    value never drops. The fill solves per-stream models with frozen rate
    parameters and can overshoot; every blend stays feasible. Returns the new
    point, its value, the realized prices, and whether anything moved."""
    mu_real = list(dual.mu)
    lam_real = [list(row) for row in dual.lam]
    moved = False
    for k in range(problem.stats.num_users):
        pairs = problem.user_pairs(k)
        if not pairs:
            continue
        s_raw = {p: _assemble_s(p, grads, dual, problem.tx_weight, problem.sar,
                                problem.weights, net=True) for p in pairs}
        bl, tops = _user_fill(problem, solver, k, cache.gammas, s_raw)
        mu_real[k] = dual.mu[k] + tops[0]
        lam_real[k] = [b + t for b, t in zip(dual.lam[k], tops[1:])]
        if all(np.max(np.abs(b - q[p])) <= 1e-12 * (1.0 + np.max(np.abs(b)))
               for p, b in bl.items()):
            continue            # refill reproduced the point, nothing to rate
        beta = 1.0
        for _ in range(8):
            blocks = q.copy_blocks()
            for (kk, l), b in bl.items():
                blocks[kk][l] = (1.0 - beta) * blocks[kk][l] + beta * b
            q_try = CovarianceSet(blocks)
            cache_try = _evaluate(problem, q_try, solver)
            val_try = _parametric_value(problem, grads, eta, q_try, cache_try)
            if val_try >= val - 1e-12 * (1.0 + abs(val)):
                if val_try > val + 1e-12 * (1.0 + abs(val)):
                    moved = True
                q, cache, val = q_try, cache_try, val_try
                break
            beta *= 0.5
    realized = DualState(mu=tuple(mu_real), lam=tuple(tuple(r) for r in lam_real),
                         eta=dual.eta, step=dual.step)
    return q, cache, val, realized, moved


def _ao_loop(problem, solver, grads, dual, q, cache):
    """Alternate rate-parameter refresh and water-filling until the efficiency
    ratio settles. Returns the final q, its evaluation, the sweep count,
    whether the loop settled before hitting its cap, and the last realized
    prices."""
    eta = dual.eta
    metric = cache.ratio
    used = 0
    settled = False
    realized = dual
    val = _parametric_value(problem, grads, eta, q, cache)
    for v2 in range(1, solver.max_inner + 1):
        q, cache, val, realized, moved = _ao_pass(problem, solver, grads, dual,
                                                  q, cache, eta, val)
        used = v2
        if not moved:
            settled = True      # sweep found no ascent at these prices
            break
        if abs(cache.ratio - metric) < solver.eps_inner * max(1e-12, abs(cache.ratio)):
            settled = True
            break
        metric = cache.ratio
    return q, cache, used, settled, realized


def _parametric_max(problem, solver, grads, eta, q_start, cache_start, dual, trace, ell, t):
    """Maximize the eta-parametrized Lagrangian over feasible covariances.

    Projected subgradient ascent on the multipliers; each step re-solves the
    inner alternating optimization warm-started at the previous point. Every
    iterate is scaled back onto the budgets and the best feasible candidate by
    parametric value is returned, so the result is never worse than the start.
    """
    dual = DualState(mu=dual.mu, lam=dual.lam, eta=eta, step=0)
    best_val = _parametric_value(problem, grads, eta, q_start, cache_start)
    best = (best_val, q_start, cache_start)
    s0 = 1.0 / (1.0 + problem.budget_norm())
    q, cache = q_start, cache_start
    stall = 0
    quiet = 0
    ao_total = 0
    dual_steps = 0
    caps = set()
    stopped = False
    for v1 in range(1, solver.max_dual + 1):
        q, cache, ao_used, settled, realized = _ao_loop(problem, solver, grads,
                                                        dual, q, cache)
        ao_total += ao_used
        if not settled:
            caps.add("inner")
        viol = _violations(problem, q)
        # safety net: the top-ups leave at most round-off violations behind
        q_f, cache_f = q, cache
        if viol > solver.feas_tol:
            q_f = q.scale_users(_feasible_scaling(problem, q))
            cache_f = _evaluate(problem, q_f, solver)
        val = _parametric_value(problem, grads, eta, q_f, cache_f)
        improved = val > best[0] + solver.eps_inner * (1.0 + abs(best[0]))
        if val > best[0]:
            best = (val, q_f, cache_f)
        dual_new = _subgradient_step(realized, q, problem.budgets_w, problem.sar, s0)
        movement = max(
            max((abs(a - b) for a, b in zip(dual_new.mu, dual.mu)), default=0.0),
            max((abs(a - b) for ra, rb in zip(dual_new.lam, dual.lam)
                 for a, b in zip(ra, rb)), default=0.0),
        )
        mult_scale = 1.0 + max(
            max(dual_new.mu, default=0.0),
            max((x for row in dual_new.lam for x in row), default=0.0),
        )
        dual_steps = v1
        trace.append({"ell": ell, "t": t, "v1": v1, "v2": ao_used,
                      "objective_nats_per_watt": cache_f.ratio, "eta": eta,
                      "max_violation": viol})
        if viol <= solver.dual_tol:
            quiet = 0 if improved else quiet + 1
            if quiet >= solver.dual_stall:
                dual = dual_new
                stopped = True  # feasible and the dual value has plateaued
                break
            if movement <= solver.dual_tol * mult_scale:
                stall += 1
                if movement == 0.0:
                    dual = dual_new
                    stopped = True
                    break       # exact dual fixed point, nothing can change
                if stall >= solver.dual_stall:
                    dual = dual_new
                    stopped = True
                    break
            else:
                stall = 0
        else:
            stall = 0
            quiet = 0
        dual = dual_new
    if not stopped:
        caps.add("dual")
    return best[1], best[2], dual, ao_total, dual_steps, caps


@dataclass
class SolveResult:
    """Solution and diagnostics of one covariance optimization."""

    q: CovarianceSet
    order: object
    ee_bits_per_joule: float
    objective_nats_per_watt: float
    rates: dict                       # pair -> weighted rate, nats, clamped at zero
    power_w: float
    dual: DualState
    eta_trace: list
    mm_ee_trace: list                 # internal ratio after each relinearization
    iterations: dict                  # i1..i4 totals
    caps_hit: tuple
    converged: bool
    trace_rows: list
    feasibility: object = None


def solve_problem(problem: RateProblem, solver: SolverConfig | None = None,
                  init: CovarianceSet | None = None,
                  report_scale: float | None = None) -> SolveResult:
    """Run the full nested solve on a RateProblem. `report_scale` converts the
    internal nats-per-watt ratio into the reported efficiency (W / ln 2 for the
    physical problem, 1 for sum-rate instances)."""
    solver = solver or SolverConfig()
    scale = 1.0 if report_scale is None else float(report_scale)
    q = init if init is not None else initial_covariances(problem)
    if _violations(problem, q) > solver.feas_tol:
        raise ValueError("initial covariances are infeasible")
    cache = _evaluate(problem, q, solver)
    dual = DualState.zeros(problem.stats.num_users, [len(r) for r in problem.sar])
    trace = []
    i1 = i2 = i4 = 0
    mm_trace = [cache.ratio]
    eta_trace = []
    caps = set()
    converged = False
    mm_used = 0
    for ell in range(1, solver.max_mm + 1):
        mm_used = ell
        grads = mm_gradients(problem.stats, q, problem.pattern, problem.noise_power_w)
        eta = max(0.0, cache.ratio)
        q_t, cache_t = q, cache
        for t in range(1, solver.max_dinkelbach + 1):
            i4 += 1
            q_new, cache_new, dual, ao_used, dual_used, step_caps = _parametric_max(
                problem, solver, grads, eta, q_t, cache_t, dual, trace, ell, t)
            i1 += ao_used
            i2 += dual_used
            caps |= step_caps
            num = _surrogate_total(problem, grads, q_new, cache_new)
            eta_new = max(0.0, num / cache_new.power)
            eta_trace.append(eta_new)
            if eta_new < eta:
                break                 # cannot happen with best-iterate tracking
            q_t, cache_t = q_new, cache_new
            if abs(eta_new - eta) < solver.eps_dinkelbach * max(1e-12, abs(eta_new)):
                eta = eta_new
                break
            eta = eta_new
        else:
            caps.add("dinkelbach")
        q, cache = q_t, cache_t
        mm_trace.append(cache.ratio)
        if abs(mm_trace[-1] - mm_trace[-2]) < solver.eps_mm * max(1e-12, abs(mm_trace[-1])):
            converged = True
            break
    if not converged:
        caps.add("mm")

    # reported per-stream rates carry the scheme's rate weights, so the EE and
    # sum-rate columns derived from them are consistent across schemes
    rates = {p: problem.weights[p] * max(0.0, cache.rates_plus[p] - cache.rates_minus[p])
             for p in problem.pairs}
    return SolveResult(
        q=q, order=problem.pattern,
        ee_bits_per_joule=scale * cache.clamped_total / cache.power,
        objective_nats_per_watt=cache.clamped_total / cache.power,
        rates=rates, power_w=cache.power, dual=dual,
        eta_trace=eta_trace, mm_ee_trace=mm_trace,
        iterations={"i1": i1, "i2": i2, "i3": mm_used, "i4": i4},
        caps_hit=tuple(sorted(caps)), converged=converged, trace_rows=trace,
    )


def solve_inner(stats: ChannelStats, order, config: SystemConfig, constraints=(),
                solver: SolverConfig | None = None,
                init: CovarianceSet | None = None) -> SolveResult:
    """Maximize deterministic-equivalent energy efficiency for a fixed decoding
    order under per-user power and exposure budgets. Bits per joule."""
    problem = RateProblem.from_config(stats, order, config, constraints)
    result = solve_problem(problem, solver, init=init,
                           report_scale=config.bandwidth_hz / np.log(2.0))
    result.feasibility = check_feasible(config, problem.sar, result.q)
    return result
