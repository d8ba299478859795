"""Beam coupling synthesis and channel-statistics file IO.

Measured coupling matrices are rarely available, so the default scenario builds
synthetic ones: each user occupies a contiguous band of dominant receive beams
with an exponentially decaying profile away from the band, and the matrix is
scaled so its total mass matches the configured path loss.
"""

import json

import numpy as np

from .linalg import dft_matrix
from .model import ChannelStats

__all__ = [
    "synthetic_coupling",
    "synthetic_stats",
    "load_channel_stats",
    "save_channel_stats",
    "complex_to_pairs",
    "pairs_to_complex",
]


def synthetic_coupling(bs_antennas: int, user_antennas, *, seed: int = 0,
                       decay: float = 0.5, band_width: int | None = None,
                       band_offset: int = 0, pathloss_db: float = 120.0):
    """Per-user beam coupling matrices Omega_k, M x N_k entrywise nonnegative.

    User k's band starts near k*M/K (plus `band_offset` and a seeded jitter) and
    spans `band_width` beams; outside the band the profile decays as
    exp(-decay * circular beam distance). Each matrix is scaled so
    sum(Omega_k) = M * N_k * 10^(-pathloss_db/10).
    """
    antennas = [user_antennas] * 1 if np.isscalar(user_antennas) else list(user_antennas)
    if np.isscalar(user_antennas):
        raise ValueError("user_antennas must be a sequence (one entry per user)")
    num_users = len(antennas)
    m = bs_antennas
    width = band_width if band_width is not None else max(2, m // (2 * num_users))
    gain = 10.0 ** (-pathloss_db / 10.0)
    rng = np.random.Generator(np.random.Philox(key=seed))

    out = []
    for k, n in enumerate(antennas):
        start = (band_offset + round(k * m / num_users)
                 + int(rng.integers(0, max(1, width // 2)))) % m
        idx = np.arange(m)
        # circular distance from the band [start, start+width)
        rel = (idx - start) % m
        dist = np.where(rel < width, 0.0, np.minimum(rel - width + 1, m - rel))
        profile = np.exp(-decay * dist)
        col_weights = rng.uniform(0.5, 1.5, size=n)
        omega = np.outer(profile, col_weights)
        omega *= m * n * gain / omega.sum()
        out.append(omega)
    return out


def synthetic_stats(bs_antennas: int, user_antennas, **kwargs) -> ChannelStats:
    """ChannelStats with synthetic coupling and DFT eigenbases."""
    coupling = synthetic_coupling(bs_antennas, user_antennas, **kwargs)
    return ChannelStats(
        coupling=tuple(coupling),
        bs_basis=dft_matrix(bs_antennas),
        user_basis=tuple(dft_matrix(om.shape[1]) for om in coupling),
    )


def complex_to_pairs(x: np.ndarray):
    """Complex matrix -> nested lists with entries encoded as [re, im]."""
    x = np.asarray(x, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in x]


def pairs_to_complex(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError("expected a matrix of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def save_channel_stats(stats: ChannelStats, path):
    doc = {
        "bs_antennas": stats.bs_antennas,
        "bs_basis": complex_to_pairs(stats.bs_basis),
        "users": [
            {"coupling": [[float(v) for v in row] for row in om],
             "user_basis": complex_to_pairs(vb)}
            for om, vb in zip(stats.coupling, stats.user_basis)
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_channel_stats(source) -> ChannelStats:
    """Read ChannelStats from a JSON file path or an already-parsed dict.

    Two layouts: {"generator": {...synthetic_coupling kwargs...}} or explicit
    per-user coupling matrices with optional bases (DFT when omitted).
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    else:
        doc = dict(source)

    if "generator" in doc:
        params = dict(doc["generator"])
        m = int(params.pop("bs_antennas"))
        num_users = int(params.pop("num_users"))
        n = params.pop("user_antennas")
        antennas = [int(n)] * num_users if np.isscalar(n) else [int(v) for v in n]
        if len(antennas) != num_users:
            raise ValueError("user_antennas must match num_users")
        allowed = {"seed", "decay", "band_width", "band_offset", "pathloss_db"}
        unknown = set(params) - allowed
        if unknown:
            raise ValueError(f"unknown generator parameters: {sorted(unknown)}")
        return synthetic_stats(m, antennas, **params)

    users = doc["users"]
    coupling = [np.asarray(u["coupling"], dtype=float) for u in users]
    m = int(doc.get("bs_antennas", coupling[0].shape[0]))
    bs_basis = pairs_to_complex(doc["bs_basis"]) if "bs_basis" in doc else dft_matrix(m)
    user_basis = [pairs_to_complex(u["user_basis"]) if "user_basis" in u
                  else dft_matrix(om.shape[1]) for u, om in zip(users, coupling)]
    return ChannelStats(coupling=tuple(coupling), bs_basis=bs_basis, user_basis=tuple(user_basis))
