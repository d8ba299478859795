import numpy as np
import pytest

import rsma_ee as ree
from rsma_ee.experiments import HANDSET_SAR_MATRIX


@pytest.fixture(scope="session")
def desk():
    """Two users, two layers, 8 BS antennas, 2 user antennas, with the
    leading 2x2 block of the handset exposure matrix. Small enough for
    oracle comparisons, rich enough to exercise both constraint families."""
    stats = ree.synthetic_stats(8, [2, 2], seed=3, pathloss_db=20.0)
    config = ree.SystemConfig(
        num_users=2, num_layers=2, bs_antennas=8, user_antennas=2,
        bandwidth_hz=1.0, noise_power_w=1.0, amplifier_inefficiency=5.0,
        circuit_power_w=1.0, bs_power_w=10.0, power_budget_w=1.0,
        sar_budget_w_per_kg=0.8)
    cons = ree.make_sar_constraints(config, np.ascontiguousarray(
        HANDSET_SAR_MATRIX[:2, :2]))
    order = ree.DecodingOrder.from_user_sequence([0, 1], 2)
    return stats, config, cons, order


@pytest.fixture(scope="session")
def desk_solution(desk):
    stats, config, cons, order = desk
    return ree.solve_inner(stats, order, config, cons)


@pytest.fixture()
def single_user():
    """One user, one layer, diagonal coupling, identity receive basis."""
    m, n = 8, 2
    omega = np.zeros((m, n))
    omega[0, 0] = 4.0
    omega[1, 1] = 2.5
    omega[2, 0] = 1.5
    omega[3, 1] = 0.5
    stats = ree.ChannelStats(coupling=(omega,),
                             bs_basis=np.eye(m, dtype=complex),
                             user_basis=(np.eye(n, dtype=complex),))
    config = ree.SystemConfig(
        num_users=1, num_layers=1, bs_antennas=m, user_antennas=n,
        bandwidth_hz=1.0, noise_power_w=1.0, amplifier_inefficiency=0.1,
        circuit_power_w=1.0, bs_power_w=10.0, power_budget_w=0.05,
        sar_budget_w_per_kg=1e9)
    return stats, config


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(2024)


def random_psd(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    m = a @ a.conj().T
    return scale * m / max(1.0, float(np.real(np.trace(m))))


def random_feasible_covariances(rng, config, stats, fill=0.9):
    """Random PSD blocks scaled so each user sits at `fill` of its power
    budget (exposure checked by the caller when it matters)."""
    budgets = config.power_budget_w
    if np.isscalar(budgets):
        budgets = [float(budgets)] * config.num_users
    blocks = []
    for k in range(config.num_users):
        n = stats.user_antennas(k)
        row = [random_psd(rng, n) for _ in range(config.num_layers)]
        tot = sum(float(np.real(np.trace(b))) for b in row)
        row = [b * (fill * budgets[k] / tot) for b in row]
        blocks.append(row)
    return ree.CovarianceSet(blocks)
