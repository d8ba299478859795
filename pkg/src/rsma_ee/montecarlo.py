"""Monte-Carlo channel sampling and ergodic rate estimation.

These estimators are the ground truth that the deterministic approximations are
validated against. Sampling uses a counter-based generator with one jumped
stream per (sample, user), so serial and parallel draws coincide bit for bit.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import logdet_psd
from .model import (ChannelStats, CovarianceSet, Pair, SystemConfig,
                    interference_cov_diag, power_consumption)

__all__ = ["ChannelSample", "MCRate", "sample_channels", "ergodic_rate_mc", "ee_mc", "mc_rates"]


@dataclass(frozen=True)
class ChannelSample:
    """One channel realization per user, in beam domain and antenna domain."""

    beam: tuple[np.ndarray, ...]   # Htilde_k, M x N_k
    full: tuple[np.ndarray, ...]   # H_k = U Htilde_k V_k^H


def sample_channels(stats: ChannelStats, count: int, seed: int) -> list[ChannelSample]:
    """Draw `count` independent realizations of every user's channel.

    Entry (i, j) of Htilde_k is CN(0, [Omega_k]_ij). Stream (s, k) uses
    Philox(seed) jumped by s*K + k, so the draw order never matters.
    """
    if count < 1:
        raise ValueError("sample count must be at least 1")
    num_users = stats.num_users
    sqrt_half = [np.sqrt(0.5 * om) for om in stats.coupling]
    u = stats.bs_basis
    out = []
    for s in range(count):
        beam = []
        full = []
        for k in range(num_users):
            rng = np.random.Generator(np.random.Philox(key=seed).jumped(s * num_users + k))
            shape = stats.coupling[k].shape
            z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
            ht = sqrt_half[k] * z
            beam.append(ht)
            full.append(u @ ht @ stats.user_basis[k].conj().T)
        out.append(ChannelSample(beam=tuple(beam), full=tuple(full)))
    return out


@dataclass(frozen=True)
class MCRate:
    """Sample means plus per-sample values of both ergodic rate estimators, nats."""

    exact: float
    hardened: float
    exact_samples: np.ndarray
    hardened_samples: np.ndarray


def _hardened_samples(stats, q, pair, kdiag, samples):
    """Per-sample hardened rate: logdet(K + Ht X Ht^H) - logdet K for diagonal K.

    Computed as logdet(I_N + X Ht^H K^{-1} Ht), which cancels logdet K exactly.
    """
    k, _ = pair
    v = stats.user_basis[k]
    x_beam = v.conj().T @ q[pair] @ v
    n = x_beam.shape[0]
    out = np.empty(len(samples))
    for s, sample in enumerate(samples):
        ht = sample.beam[k]
        out[s] = logdet_psd(np.eye(n, dtype=complex)
                            + x_beam @ (ht.conj().T * (1.0 / kdiag)) @ ht)
    return out


def ergodic_rate_mc(stats: ChannelStats, q: CovarianceSet, order, pair: Pair,
                    samples: list[ChannelSample], noise_power_w: float) -> MCRate:
    """Both Monte-Carlo rate estimators for one stream.

    exact: per-sample interference covariance C = sigma^2 I + sum H_p Q_p H_p^H
    over the streams not yet decoded; rate = logdet(C + H Q H^H) - logdet C.
    hardened: C is replaced by the deterministic diagonal covariance K of the
    beam-domain model, with only the target's own channel kept random.
    """
    k, _ = pair
    m = stats.bs_antennas
    interferers = order.interferers(pair)
    kdiag = interference_cov_diag(stats, q, order, pair, noise_power_w)

    exact = np.empty(len(samples))
    for s, sample in enumerate(samples):
        c = noise_power_w * np.eye(m, dtype=complex)
        for (p, l) in interferers:
            hp = sample.full[p]
            c = c + hp @ q[(p, l)] @ hp.conj().T
        h = sample.full[k]
        exact[s] = logdet_psd(c + h @ q[pair] @ h.conj().T) - logdet_psd(c)
    hardened = _hardened_samples(stats, q, pair, kdiag, samples)
    return MCRate(exact=float(exact.mean()), hardened=float(hardened.mean()),
                  exact_samples=exact, hardened_samples=hardened)


def mc_rates(stats: ChannelStats, q: CovarianceSet, order,
             samples: list[ChannelSample], noise_power_w: float,
             hardened: bool = True) -> dict:
    """Mean rate per stream for every stream at once, nats.

    The default estimator samples the target's own channel and keeps the
    interference covariance at its statistical mean, which is the rate the
    rest of the library defines and optimizes.  With hardened=False the
    interferers' channels are drawn per sample as well, estimating the rate
    under instantaneous interference; comparing the two quantifies how well
    the mean-interference model self-averages.  That estimator reuses one
    suffix-sum sweep over the decoding sequence per sample: with
    D_r = logdet(sigma^2 I + sum of streams ranked >= r), the stream at
    rank r has rate D_r - D_{r+1}.
    """
    if hardened:
        out = {}
        for pair in order.pairs:
            kdiag = interference_cov_diag(stats, q, order, pair, noise_power_w)
            out[pair] = float(_hardened_samples(stats, q, pair, kdiag, samples).mean())
        return out

    if not hasattr(order, "sequence"):
        # general interference pattern, no successive structure to exploit
        return {p: ergodic_rate_mc(stats, q, order, p, samples, noise_power_w).exact
                for p in order.pairs}

    seq = order.sequence
    m = stats.bs_antennas
    num = len(seq)
    acc = {p: np.empty(len(samples)) for p in seq}
    eye = np.eye(m, dtype=complex)
    for s, sample in enumerate(samples):
        g = [sample.full[p] @ q[(p, l)] @ sample.full[p].conj().T for (p, l) in seq]
        total = noise_power_w * eye
        logdets = np.empty(num + 1)
        logdets[num] = m * np.log(noise_power_w)
        for r in range(num - 1, -1, -1):
            total = total + g[r]
            logdets[r] = logdet_psd(total)
        for r, p in enumerate(seq):
            acc[p][s] = logdets[r] - logdets[r + 1]
    return {p: float(v.mean()) for p, v in acc.items()}


def ee_mc(config: SystemConfig, stats: ChannelStats, q: CovarianceSet, order,
          samples: list[ChannelSample], hardened: bool = True) -> float:
    """Monte-Carlo energy efficiency, bits per joule.

    W * sum of ergodic rates / (ln 2 * total consumed power); the rate sum
    uses the mean-interference estimator by default, matching the rate
    definition the optimizer works with, and the instantaneous-interference
    estimator when `hardened` is False.
    """
    rates = mc_rates(stats, q, order, samples, config.noise_power_w, hardened=hardened)
    total_nats = float(sum(rates.values()))
    return config.bandwidth_hz * total_nats / (np.log(2.0) * power_consumption(config, q))
