"""Independent reference implementations used to pin test expectations.

Every routine here solves the same mathematical subproblem as the library
through a different method (1-D quadrature, bisection on a water level,
projected gradient with numeric differentiation, power iteration), so the
expected values in the tests never share a code path with the code under
test.
"""

import numpy as np
from scipy import integrate

from rsma_ee import CovarianceSet
from rsma_ee.de import de_ee, de_fixed_point


def quadrature_rate(q_power: float, omega: float, noise: float) -> float:
    """E{log(noise + q |h|^2)} - log(noise) for scalar h ~ CN(0, omega).

    |h|^2 / omega is unit exponential, so the expectation is a 1-D integral
    against exp(-t).
    """
    def integrand(t):
        return np.log(noise + q_power * omega * t) * np.exp(-t)

    val, _ = integrate.quad(integrand, 0.0, np.inf, limit=400)
    return float(val - np.log(noise))


def power_iteration(a: np.ndarray, iters: int = 2000, tol: float = 1e-14) -> float:
    """Largest eigenvalue of a Hermitian PSD matrix by repeated multiplication."""
    a = np.asarray(a, dtype=complex)
    x = np.ones(a.shape[0], dtype=complex) / np.sqrt(a.shape[0])
    lam = 0.0
    for _ in range(iters):
        y = a @ x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x_new = y / norm
        lam_new = float(np.real(x_new.conj() @ a @ x_new))
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new
        x, lam = x_new, lam_new
    return lam


def water_level_powers(gains: np.ndarray, budget: float,
                       tol: float = 1e-13) -> np.ndarray:
    """Powers (nu - 1/g)+ with the level nu found by bisection so the total
    meets the budget exactly. Zero-gain modes get zero power."""
    gains = np.asarray(gains, dtype=float)
    pos = gains > 0.0
    if budget <= 0.0 or not np.any(pos):
        return np.zeros_like(gains)
    inv = np.zeros_like(gains)
    inv[pos] = 1.0 / gains[pos]

    def total(nu):
        return float(np.sum(np.maximum(nu - inv[pos], 0.0)))

    lo = float(np.min(inv[pos]))
    hi = lo + budget
    while total(hi) < budget:
        hi = lo + 2.0 * (hi - lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if total(mid) < budget:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, hi):
            break
    nu = 0.5 * (lo + hi)
    out = np.zeros_like(gains)
    out[pos] = np.maximum(nu - inv[pos], 0.0)
    return out


def classical_water_fill_rate(gains: np.ndarray, budget: float) -> float:
    """max sum log(1 + g_i p_i) subject to sum p_i <= budget, p >= 0."""
    p = water_level_powers(gains, budget)
    return float(np.sum(np.log1p(np.asarray(gains) * p)))


def fd_hermitian_gradient(f, q0: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference Hermitian gradient G of a real scalar f(Q), in the
    convention df = tr(G dQ): G_ii from diagonal bumps, off-diagonal real and
    imaginary parts from paired symmetric bumps."""
    n = q0.shape[0]
    g = np.zeros((n, n), dtype=complex)

    def bump(direction):
        return (f(q0 + h * direction) - f(q0 - h * direction)) / (2.0 * h)

    for i in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1.0
        g[i, i] = bump(e)
        for j in range(i + 1, n):
            er = np.zeros((n, n), dtype=complex)
            er[i, j] = er[j, i] = 1.0
            ei = np.zeros((n, n), dtype=complex)
            ei[i, j] = 1.0j
            ei[j, i] = -1.0j
            dre = bump(er)
            dim = bump(ei)
            g[i, j] = 0.5 * dre + 0.5j * dim
            g[j, i] = np.conj(g[i, j])
    return g


def logdet_trace_objective(s: np.ndarray, gamma: np.ndarray,
                           q: np.ndarray) -> float:
    """log det(I + Gamma Q) - tr(S Q) evaluated without Cholesky helpers."""
    n = q.shape[0]
    logdet = np.linalg.slogdet(np.eye(n, dtype=complex) + gamma @ q).logabsdet
    return float(logdet - np.real(np.trace(s @ q)))


def _psd_project(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * np.maximum(w, 0.0)) @ v.conj().T


def pga_logdet_trace(s: np.ndarray, gamma: np.ndarray, starts: int = 5,
                     seed: int = 0, steps: int = 4000) -> float:
    """Projected-gradient ascent on log det(I + Gamma Q) - tr(S Q) over the
    PSD cone from several random starts; returns the best objective."""
    n = s.shape[0]
    rng = np.random.default_rng(seed)
    best = logdet_trace_objective(s, gamma, np.zeros((n, n), dtype=complex))
    inits = [np.zeros((n, n), dtype=complex)]
    for _ in range(starts):
        a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        inits.append(0.5 * (a @ a.conj().T) / n)
    eye = np.eye(n, dtype=complex)
    for q in inits:
        q = _psd_project(q)
        val = logdet_trace_objective(s, gamma, q)
        lr = 1.0
        for _ in range(steps):
            grad = gamma @ np.linalg.inv(eye + q @ gamma) - s
            grad = 0.5 * (grad + grad.conj().T)
            improved = False
            step = lr
            for _ in range(40):
                q_try = _psd_project(q + step * grad)
                v_try = logdet_trace_objective(s, gamma, q_try)
                if v_try > val + 1e-16:
                    q, val = q_try, v_try
                    lr = min(step * 2.0, 4.0)
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break
        best = max(best, val)
    return best


def _project_user_blocks(blocks, budget_w, constraints, sweeps=120):
    """Dykstra alternating projection of one user's layer blocks onto the
    intersection of the PSD cone, the total-power halfspace and each exposure
    halfspace."""
    layers = len(blocks)
    n = blocks[0].shape[0]
    z = [b.copy() for b in blocks]
    num_sets = 2 + len(constraints)
    increments = [[np.zeros((n, n), dtype=complex) for _ in range(layers)]
                  for _ in range(num_sets)]
    eye = np.eye(n, dtype=complex)
    for _ in range(sweeps):
        for si in range(num_sets):
            y = [z[l] + increments[si][l] for l in range(layers)]
            if si == 0:
                p = [_psd_project(m) for m in y]
            elif si == 1:
                tot = sum(float(np.real(np.trace(m))) for m in y)
                if tot <= budget_w:
                    p = [m.copy() for m in y]
                else:
                    c = (tot - budget_w) / (layers * n)
                    p = [m - c * eye for m in y]
            else:
                con = constraints[si - 2]
                r = con.matrix
                val = sum(float(np.real(np.trace(r @ m))) for m in y)
                if val <= con.budget_w_per_kg:
                    p = [m.copy() for m in y]
                else:
                    c = ((val - con.budget_w_per_kg)
                         / (layers * float(np.real(np.trace(r @ r)))))
                    p = [m - c * r for m in y]
            increments[si] = [y[l] - p[l] for l in range(layers)]
            z = p
    return z


def _pack(blocks, pairs):
    vs = []
    for (k, l) in pairs:
        b = blocks[k][l]
        n = b.shape[0]
        for i in range(n):
            vs.append(b[i, i].real)
            for j in range(i + 1, n):
                vs.append(b[i, j].real)
                vs.append(b[i, j].imag)
    return np.array(vs)


def _unpack(v, pairs, dims, num_users, num_layers):
    blocks = [[np.zeros((dims[k], dims[k]), dtype=complex)
               for _ in range(num_layers)] for k in range(num_users)]
    idx = 0
    for (k, l) in pairs:
        n = dims[k]
        b = np.zeros((n, n), dtype=complex)
        for i in range(n):
            b[i, i] = v[idx]
            idx += 1
            for j in range(i + 1, n):
                re = v[idx]
                idx += 1
                im = v[idx]
                idx += 1
                b[i, j] = re + 1j * im
                b[j, i] = re - 1j * im
        blocks[k][l] = b
    return blocks


def pga_de_ee(config, stats, order, constraints, q_starts,
              steps=250, lr=0.1, fd=1e-6):
    """Projected-gradient ascent on the full efficiency ratio over the
    feasible set, differentiated numerically; returns the best
    (nats-per-watt objective, covariance set) over the given starts.

    The objective is evaluated through the public de_ee entry point and the
    feasible set is handled by Dykstra projection per user, so nothing here
    touches the solver's own machinery.
    """
    pairs = sorted((k, l) for k in range(config.num_users)
                   for l in range(config.num_layers))
    dims = [stats.user_antennas(k) for k in range(config.num_users)]
    budgets = config.power_budget_w
    if np.isscalar(budgets):
        budgets = [float(budgets)] * config.num_users
    cons = constraints if constraints else tuple(() for _ in range(config.num_users))

    def project(blocks):
        out = [row[:] for row in blocks]
        for k in range(config.num_users):
            out[k] = _project_user_blocks(out[k], budgets[k], cons[k])
        return out

    def value(v):
        blocks = _unpack(v, pairs, dims, config.num_users, config.num_layers)
        q = CovarianceSet(blocks, clamp=False)
        return de_ee(config, stats, q, order).objective_nats_per_watt

    best_val = -np.inf
    best_blocks = None
    for q0 in q_starts:
        x = _pack(project(q0.copy_blocks()), pairs)
        fx = value(x)
        for _ in range(steps):
            g = np.zeros_like(x)
            for i in range(len(x)):
                xp = x.copy()
                xp[i] += fd
                xm = x.copy()
                xm[i] -= fd
                g[i] = (value(xp) - value(xm)) / (2.0 * fd)
            step = lr
            improved = False
            for _ in range(14):
                cand = _unpack(x + step * g, pairs, dims,
                               config.num_users, config.num_layers)
                x_try = _pack(project(cand), pairs)
                f_try = value(x_try)
                if f_try > fx + 1e-14:
                    x, fx = x_try, f_try
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break
        if fx > best_val:
            best_val = fx
            best_blocks = _unpack(x, pairs, dims, config.num_users,
                                  config.num_layers)
    return best_val, CovarianceSet(best_blocks, clamp=False)


def single_user_ao_water_fill(stats, config, budget_w, rounds=400,
                              tol=1e-12):
    """Alternating optimum for one user, one layer, power budget only:
    refresh the fixed-point channel curvature at the current covariance, then
    re-fill the budget classically over its eigenmodes with a bisected water
    level. Returns (final covariance, final rate in nats) evaluated through
    the public fixed-point interface."""
    from rsma_ee import DecodingOrder
    from rsma_ee.de import de_rates

    order = DecodingOrder.identity(1, 1)
    n = stats.user_antennas(0)
    q = CovarianceSet([[budget_w / n * np.eye(n, dtype=complex)]])
    prev = -np.inf
    for _ in range(rounds):
        params = de_fixed_point(stats, q, order, (0, 0), config.noise_power_w)
        w, v = np.linalg.eigh(params.gamma)
        p = water_level_powers(np.maximum(w, 0.0), budget_w)
        q = CovarianceSet([[(v * p) @ v.conj().T]])
        rate = de_rates(stats, q, order, config.noise_power_w).rates[(0, 0)]
        if abs(rate - prev) <= tol * max(1.0, abs(rate)):
            break
        prev = rate
    der = de_rates(stats, q, order, config.noise_power_w)
    return q, der.rates[(0, 0)]


def scale_to_feasible(config, constraints, q):
    """Uniform per-user downscaling until power and exposure budgets hold."""
    budgets = config.power_budget_w
    if np.isscalar(budgets):
        budgets = [float(budgets)] * config.num_users
    factors = []
    for k in range(config.num_users):
        f = 1.0
        pw = q.user_power(k)
        if pw > budgets[k]:
            f = min(f, budgets[k] / pw)
        if constraints:
            for con in constraints[k]:
                val = sum(float(np.real(np.trace(con.matrix @ q[(k, l)])))
                          for l in range(q.num_layers))
                if val > con.budget_w_per_kg:
                    f = min(f, con.budget_w_per_kg / val)
        factors.append(0.999 * f if f < 1.0 else 1.0)
    return q.scale_users(factors)
