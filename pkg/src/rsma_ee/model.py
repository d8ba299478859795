"""System model for multi-layer uplink transmission with successive decoding.

Types and operations shared by every solver: configuration, second-order channel
statistics in beam domain, exposure constraints, decoding orders, covariance sets,
and the deterministic maps built from the beam coupling matrices.

Conventions: rates are in nats per channel use and powers in watts everywhere
inside the library; unit conversion happens only at reporting boundaries.
"""

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import PSD_CLAMP_TOL, dft_matrix, herm, is_unitary, psd_clamp

__all__ = [
    "Pair",
    "SystemConfig",
    "ChannelStats",
    "SARConstraint",
    "DecodingOrder",
    "InterferencePattern",
    "CovarianceSet",
    "FeasibilityReport",
    "dft_matrix",
    "theta_tilde",
    "theta",
    "theta_tilde_diag",
    "theta_diag",
    "interference_cov",
    "interference_cov_diag",
    "power_consumption",
    "sar_values",
    "check_feasible",
]

# A stream is identified by the (user, layer) index pair, both 0-based.
Pair = tuple[int, int]


def _per_user(value, num_users: int, name: str) -> tuple:
    """Broadcast a scalar to a per-user tuple, or validate the given length."""
    if np.isscalar(value):
        return (value,) * num_users
    out = tuple(value)
    if len(out) != num_users:
        raise ValueError(f"{name} must have one entry per user ({num_users}), got {len(out)}")
    return out


@dataclass(frozen=True)
class SystemConfig:
    """Static scenario description. All powers in watts, bandwidth in Hz.

    Per-user fields accept a scalar (broadcast to every user) or a length-K sequence.
    """

    num_users: int                      # K
    num_layers: int                     # L, rate-splitting layers per user
    bs_antennas: int                    # M
    user_antennas: Sequence[int] | int  # N_k
    bandwidth_hz: float                 # W
    noise_power_w: float                # sigma^2
    amplifier_inefficiency: Sequence[float] | float  # xi_k, transmit power multiplier
    circuit_power_w: Sequence[float] | float         # P_{c,k}
    bs_power_w: float                   # P_BS
    power_budget_w: Sequence[float] | float          # P_max,k
    # one exposure budget per (user, body region); empty tuples disable the constraint
    sar_budget_w_per_kg: Sequence[Sequence[float]] = field(default_factory=tuple)

    def __post_init__(self):
        if self.num_users < 1 or self.num_layers < 1 or self.bs_antennas < 1:
            raise ValueError("num_users, num_layers and bs_antennas must be positive")
        k = self.num_users
        object.__setattr__(self, "user_antennas", _per_user(self.user_antennas, k, "user_antennas"))
        object.__setattr__(self, "amplifier_inefficiency",
                           _per_user(self.amplifier_inefficiency, k, "amplifier_inefficiency"))
        object.__setattr__(self, "circuit_power_w", _per_user(self.circuit_power_w, k, "circuit_power_w"))
        object.__setattr__(self, "power_budget_w", _per_user(self.power_budget_w, k, "power_budget_w"))
        sar = self.sar_budget_w_per_kg
        if sar is None:
            sar = ()
        if np.isscalar(sar):
            sar = tuple((float(sar),) for _ in range(k))     # one region per user
        elif len(sar) == 0:
            sar = ((),) * k                                  # constraint disabled
        elif np.isscalar(sar[0]):
            vals = _per_user(sar, k, "sar_budget_w_per_kg")  # flat, one region each
            sar = tuple((float(v),) for v in vals)
        else:
            sar = tuple(tuple(float(v) for v in row) for row in sar)
        if len(sar) != k:
            raise ValueError("sar_budget_w_per_kg must have one row per user")
        object.__setattr__(self, "sar_budget_w_per_kg", sar)

        if any(n < 1 for n in self.user_antennas):
            raise ValueError("user_antennas must be positive")
        if self.bandwidth_hz <= 0 or self.noise_power_w <= 0 or self.bs_power_w < 0:
            raise ValueError("bandwidth and noise power must be positive")
        if any(x <= 0 for x in self.amplifier_inefficiency):
            raise ValueError("amplifier inefficiency must be positive")
        if any(p < 0 for p in self.circuit_power_w):
            raise ValueError("circuit power must be nonnegative")
        if any(p <= 0 for p in self.power_budget_w):
            raise ValueError("power budgets must be positive")
        if any(d <= 0 for row in self.sar_budget_w_per_kg for d in row):
            raise ValueError("exposure budgets must be positive")

    @property
    def pairs(self) -> tuple[Pair, ...]:
        """All (user, layer) streams in canonical order."""
        return tuple((k, l) for k in range(self.num_users) for l in range(self.num_layers))

    def sar_count(self, k: int) -> int:
        return len(self.sar_budget_w_per_kg[k])


@dataclass(frozen=True)
class ChannelStats:
    """Beam-domain second-order statistics: H_k = U Htilde_k V_k^H.

    coupling[k] is the M x N_k matrix of entrywise variances of Htilde_k
    (nonnegative real), bs_basis the common M x M unitary receive eigenbasis,
    user_basis[k] the N_k x N_k unitary transmit eigenbasis.
    """

    coupling: tuple[np.ndarray, ...]
    bs_basis: np.ndarray
    user_basis: tuple[np.ndarray, ...]

    def __post_init__(self):
        coupling = tuple(np.ascontiguousarray(np.asarray(c, dtype=float)) for c in self.coupling)
        object.__setattr__(self, "coupling", coupling)
        object.__setattr__(self, "bs_basis", np.asarray(self.bs_basis, dtype=complex))
        object.__setattr__(self, "user_basis",
                           tuple(np.asarray(v, dtype=complex) for v in self.user_basis))
        m = self.bs_basis.shape[0]
        if not is_unitary(self.bs_basis):
            raise ValueError("bs_basis must be unitary")
        if len(self.user_basis) != len(coupling):
            raise ValueError("coupling and user_basis must have one entry per user")
        for k, (om, v) in enumerate(zip(coupling, self.user_basis)):
            if om.ndim != 2 or om.shape[0] != m:
                raise ValueError(f"coupling[{k}] must be {m} x N_k")
            if np.any(om < 0):
                raise ValueError(f"coupling[{k}] must be entrywise nonnegative")
            if not is_unitary(v) or v.shape[0] != om.shape[1]:
                raise ValueError(f"user_basis[{k}] must be unitary of size N_k")

    @property
    def num_users(self) -> int:
        return len(self.coupling)

    @property
    def bs_antennas(self) -> int:
        return self.bs_basis.shape[0]

    def user_antennas(self, k: int) -> int:
        return self.coupling[k].shape[1]


@dataclass(frozen=True)
class SARConstraint:
    """One exposure constraint tr(R Q_k) <= budget for a (user, body region) pair."""

    matrix: np.ndarray          # N_k x N_k Hermitian PSD, W/kg per watt
    budget_w_per_kg: float      # D_{k,a}

    def __post_init__(self):
        mat = psd_clamp(np.asarray(self.matrix, dtype=complex), label="SAR matrix")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        if self.budget_w_per_kg <= 0:
            raise ValueError("exposure budget must be positive")


def make_sar_constraints(config: SystemConfig, matrices) -> tuple[tuple[SARConstraint, ...], ...]:
    """Pair the config's per-(user, region) budgets with the given matrices.

    `matrices` is a single array (shared by every user and region), a per-user
    sequence of per-region arrays, or None when every budget row is empty.
    """
    out = []
    for k in range(config.num_users):
        budgets = config.sar_budget_w_per_kg[k]
        if matrices is None:
            if budgets:
                raise ValueError(f"user {k} has exposure budgets but no matrices")
            mats = []
        elif isinstance(matrices, np.ndarray):
            mats = [matrices] * len(budgets)
        else:
            mats = list(matrices[k])
            if len(mats) != len(budgets):
                raise ValueError(f"user {k}: {len(budgets)} budgets but {len(mats)} matrices")
        out.append(tuple(SARConstraint(m, d) for m, d in zip(mats, budgets)))
    return tuple(out)


class InterferencePattern:
    """For each stream, the set of streams whose signals it must treat as noise.

    A successive decoder induces a consistent pattern (later-decoded streams
    interfere with earlier ones); schemes without successive decoding build the
    pattern directly.
    """

    def __init__(self, interferers: dict):
        self._interferers = {p: tuple(v) for p, v in interferers.items()}
        affected: dict = {p: [] for p in self._interferers}
        for target, srcs in self._interferers.items():
            for s in srcs:
                if s not in self._interferers:
                    raise ValueError(f"interferer {s} is not a known stream")
                affected[s].append(target)
        self._affected = {p: tuple(v) for p, v in affected.items()}

    @property
    def pairs(self) -> tuple[Pair, ...]:
        return tuple(sorted(self._interferers))

    def interferers(self, pair: Pair) -> tuple[Pair, ...]:
        """Streams still undecoded when `pair` is detected (the set Q_{k,l})."""
        return self._interferers[pair]

    def affected(self, pair: Pair) -> tuple[Pair, ...]:
        """Streams whose rates see `pair` as interference (the set Qbar_{k,l})."""
        return self._affected[pair]

    @classmethod
    def full(cls, pairs) -> "InterferencePattern":
        """Every stream interferes with every other stream (no cancellation)."""
        pairs = tuple(pairs)
        return cls({p: tuple(q for q in pairs if q != p) for p in pairs})

    @classmethod
    def none(cls, pairs) -> "InterferencePattern":
        """Orthogonal access: no stream sees any interference."""
        return cls({p: () for p in pairs})


class DecodingOrder:
    """A successive decoding order: a bijection from streams to ranks 1..K*L.

    Rank 1 is decoded first. Streams decoded later interfere with earlier ones.
    """

    def __init__(self, sequence: Sequence[Pair]):
        seq = tuple((int(k), int(l)) for k, l in sequence)
        if len(set(seq)) != len(seq):
            raise ValueError("decoding sequence contains duplicates")
        users = {k for k, _ in seq}
        layers = {l for _, l in seq}
        expect = {(k, l) for k in range(max(users) + 1) for l in range(max(layers) + 1)}
        if set(seq) != expect:
            raise ValueError("decoding sequence must cover the full (user, layer) grid")
        self.sequence = seq
        self._rank = {p: i + 1 for i, p in enumerate(seq)}

    def __repr__(self):
        return f"DecodingOrder({list(self.sequence)})"

    def __eq__(self, other):
        return isinstance(other, DecodingOrder) and self.sequence == other.sequence

    def __hash__(self):
        return hash(self.sequence)

    @property
    def pairs(self) -> tuple[Pair, ...]:
        return tuple(sorted(self.sequence))

    def rank(self, pair: Pair) -> int:
        return self._rank[pair]

    def interferers(self, pair: Pair) -> tuple[Pair, ...]:
        """Streams decoded after `pair`, in sequence order."""
        r = self._rank[pair]
        return self.sequence[r:]

    def preceding(self, pair: Pair) -> tuple[Pair, ...]:
        """Streams decoded before `pair`, in sequence order."""
        return self.sequence[: self._rank[pair] - 1]

    # alias so DecodingOrder satisfies the InterferencePattern interface
    affected = preceding

    def reversed(self) -> "DecodingOrder":
        return DecodingOrder(self.sequence[::-1])

    @classmethod
    def identity(cls, num_users: int, num_layers: int) -> "DecodingOrder":
        return cls([(k, l) for k in range(num_users) for l in range(num_layers)])

    @classmethod
    def from_user_sequence(cls, users: Sequence[int], num_layers: int) -> "DecodingOrder":
        """All layers of users[0] first (in layer order), then users[1], ..."""
        return cls([(k, l) for k in users for l in range(num_layers)])


class CovarianceSet:
    """Per-stream transmit covariances Q_{k,l} (N_k x N_k Hermitian PSD).

    Construction symmetrizes and clamps small negative eigenvalues (>= -1e-8
    relative); genuinely indefinite input raises. Blocks are read-only.
    """

    def __init__(self, blocks: Sequence[Sequence[np.ndarray]], clamp: bool = True):
        rows = []
        for k, user_blocks in enumerate(blocks):
            row = []
            for l, q in enumerate(user_blocks):
                q = np.asarray(q, dtype=complex)
                if q.ndim != 2 or q.shape[0] != q.shape[1]:
                    raise ValueError(f"Q[{k},{l}] must be square")
                q = psd_clamp(q, tol=PSD_CLAMP_TOL, label=f"Q[{k},{l}]") if clamp else herm(q)
                q.setflags(write=False)
                row.append(q)
            rows.append(tuple(row))
        self.blocks = tuple(rows)
        if not self.blocks or any(len(r) != len(self.blocks[0]) for r in self.blocks):
            raise ValueError("every user needs the same number of layers")

    @property
    def num_users(self) -> int:
        return len(self.blocks)

    @property
    def num_layers(self) -> int:
        return len(self.blocks[0])

    @property
    def pairs(self) -> tuple[Pair, ...]:
        return tuple((k, l) for k in range(self.num_users) for l in range(self.num_layers))

    def __getitem__(self, pair: Pair) -> np.ndarray:
        k, l = pair
        return self.blocks[k][l]

    def user_power(self, k: int) -> float:
        return float(sum(np.real(np.trace(q)) for q in self.blocks[k]))

    def total_power(self) -> float:
        return float(sum(self.user_power(k) for k in range(self.num_users)))

    def replace(self, pair: Pair, q: np.ndarray) -> "CovarianceSet":
        k, l = pair
        rows = [list(r) for r in self.blocks]
        rows[k][l] = q
        return CovarianceSet(rows)

    def scale_users(self, factors: Sequence[float]) -> "CovarianceSet":
        rows = [[f * q for q in row] for f, row in zip(factors, self.blocks)]
        return CovarianceSet(rows, clamp=False)

    def copy_blocks(self) -> list[list[np.ndarray]]:
        return [[np.array(q) for q in row] for row in self.blocks]

    @classmethod
    def zeros(cls, user_antennas: Sequence[int], num_layers: int) -> "CovarianceSet":
        return cls([[np.zeros((n, n), dtype=complex) for _ in range(num_layers)]
                    for n in user_antennas], clamp=False)

    @classmethod
    def scaled_identity(cls, user_antennas: Sequence[int], num_layers: int,
                        scales: Sequence[float]) -> "CovarianceSet":
        return cls([[c * np.eye(n, dtype=complex) for _ in range(num_layers)]
                    for n, c in zip(user_antennas, scales)], clamp=False)


# ---------------------------------------------------------------------------
# Deterministic maps built from the coupling matrices.
# ---------------------------------------------------------------------------

def theta_tilde_diag(stats: ChannelStats, k: int, x: np.ndarray) -> np.ndarray:
    """Diagonal of Thetatilde_k(X) as a length-M real vector.

    [Thetatilde_k(X)]_ii = sum_j [Omega_k]_ij [V_k^H X V_k]_jj, linear in X.
    """
    v = stats.user_basis[k]
    inner = np.real(np.einsum("ji,jl,li->i", v.conj(), np.asarray(x, dtype=complex), v))
    return stats.coupling[k] @ inner


def theta_diag(stats: ChannelStats, k: int, x: np.ndarray) -> np.ndarray:
    """Diagonal of Theta_k(X) as a length-N_k real vector.

    [Theta_k(X)]_jj = sum_i [Omega_k]_ij [X]_ii; only diag(X) enters.
    """
    d = np.real(np.diag(np.asarray(x)))
    return stats.coupling[k].T @ d


def theta_tilde(stats: ChannelStats, k: int, x: np.ndarray) -> np.ndarray:
    """Thetatilde_k(X) as an M x M diagonal matrix (receive-side averaged covariance)."""
    return np.diag(theta_tilde_diag(stats, k, x)).astype(complex)


def theta(stats: ChannelStats, k: int, x: np.ndarray) -> np.ndarray:
    """Theta_k(X) as an N_k x N_k diagonal matrix (transmit-side averaged covariance)."""
    return np.diag(theta_diag(stats, k, x)).astype(complex)


def interference_cov_diag(stats: ChannelStats, q: CovarianceSet, order,
                          pair: Pair, noise_power_w: float) -> np.ndarray:
    """Diagonal of the hardened interference-plus-noise covariance K_{k,l}, length M.

    sigma^2 I plus the receive-side averaged covariances of every stream still
    undecoded when `pair` is detected.
    """
    diag = np.full(stats.bs_antennas, float(noise_power_w))
    for (p, l) in order.interferers(pair):
        diag = diag + theta_tilde_diag(stats, p, q[(p, l)])
    return diag


def interference_cov(stats: ChannelStats, q: CovarianceSet, order,
                     pair: Pair, noise_power_w: float) -> np.ndarray:
    """Hardened interference-plus-noise covariance K_{k,l} as an M x M diagonal matrix."""
    return np.diag(interference_cov_diag(stats, q, order, pair, noise_power_w)).astype(complex)


def power_consumption(config: SystemConfig, q: CovarianceSet) -> float:
    """Total consumed power: sum_k (xi_k sum_l tr Q_{k,l} + P_{c,k}) + P_BS, watts."""
    total = config.bs_power_w
    for k in range(config.num_users):
        total += config.amplifier_inefficiency[k] * q.user_power(k) + config.circuit_power_w[k]
    return float(total)


def sar_values(constraints, q: CovarianceSet) -> dict:
    """Exposure levels sum_l tr(R_{k,a} Q_{k,l}) keyed by (user, region)."""
    out = {}
    for k, user_cons in enumerate(constraints):
        for a, con in enumerate(user_cons):
            out[(k, a)] = float(sum(np.real(np.trace(con.matrix @ q[(k, l)]))
                                    for l in range(q.num_layers)))
    return out


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    power_slack_w: tuple[float, ...]            # P_max,k - sum_l tr Q_{k,l}
    sar_slack: dict                             # (k,a) -> D_{k,a} - exposure
    min_eigenvalue: float                       # over all blocks

    def min_power_slack(self) -> float:
        return min(self.power_slack_w)

    def min_sar_slack(self) -> float:
        return min(self.sar_slack.values()) if self.sar_slack else float("inf")


def check_feasible(config: SystemConfig, constraints, q: CovarianceSet,
                   rel_tol: float = 1e-6) -> FeasibilityReport:
    """Check power, exposure and PSD feasibility of a covariance set.

    Budget violations up to rel_tol relative are accepted (solver tolerance);
    PSD is checked against the construction clamp threshold.
    """
    power_slack = tuple(config.power_budget_w[k] - q.user_power(k)
                        for k in range(config.num_users))
    exposures = sar_values(constraints, q)
    sar_slack = {}
    ok = True
    for k in range(config.num_users):
        if power_slack[k] < -rel_tol * config.power_budget_w[k]:
            ok = False
    for (k, a), value in exposures.items():
        budget = constraints[k][a].budget_w_per_kg
        sar_slack[(k, a)] = budget - value
        if value > budget * (1 + rel_tol):
            ok = False
    min_eig = 0.0
    for pair in q.pairs:
        block = q[pair]
        w = np.linalg.eigvalsh(herm(block)) if block.size else np.array([0.0])
        min_eig = min(min_eig, float(w[0]))
        if w[0] < -PSD_CLAMP_TOL * max(1.0, float(np.max(np.abs(w)))):
            ok = False
    return FeasibilityReport(ok, power_slack, sar_slack, min_eig)
