import numpy as np
import pytest

import rsma_ee as ree
from rsma_ee.ordering import (EXHAUSTIVE_CAP, exhaustive_order, greedy_order,
                              single_user_rate, solve)
import rsma_ee.ordering as ordering_mod
import oracles


def two_user_config(**overrides):
    base = dict(num_users=2, num_layers=2, bs_antennas=8, user_antennas=2,
                bandwidth_hz=1.0, noise_power_w=1.0, amplifier_inefficiency=5.0,
                circuit_power_w=1.0, bs_power_w=10.0, power_budget_w=1.0,
                sar_budget_w_per_kg=())
    base.update(overrides)
    return ree.SystemConfig(**base)


class TestSingleUserRate:
    def test_zero_coupling_zero_rate(self):
        z = np.zeros((4, 2))
        stats = ree.ChannelStats(coupling=(z, z),
                                 bs_basis=np.eye(4, dtype=complex),
                                 user_basis=(np.eye(2, dtype=complex),) * 2)
        cfg = two_user_config(bs_antennas=4)
        assert single_user_rate(stats, cfg, (), 0) == 0.0

    def test_monotone_in_coupling_strength(self):
        cfg = two_user_config()
        for seed in range(5):
            stats = ree.synthetic_stats(8, [2, 2], seed=seed, pathloss_db=20.0)
            boosted = ree.ChannelStats(
                coupling=(2.0 * stats.coupling[0], stats.coupling[1]),
                bs_basis=stats.bs_basis, user_basis=stats.user_basis)
            r = single_user_rate(stats, cfg, (), 0)
            rb = single_user_rate(boosted, cfg, (), 0)
            assert rb >= r - 1e-10

    def test_matches_alternating_water_fill_oracle(self, single_user):
        stats, config = single_user
        got = single_user_rate(stats, config, (), 0)
        _, ref = oracles.single_user_ao_water_fill(stats, config,
                                                   config.power_budget_w[0])
        assert abs(got - ref) / ref < 1e-6

    def test_bounded_by_classical_water_filling(self, single_user):
        # filling the mean per-antenna curvatures ignores the fading loss, so
        # it upper-bounds the solo rate without straying far at this scale
        stats, config = single_user
        got = single_user_rate(stats, config, (), 0)
        gains = stats.coupling[0].T @ np.ones(8)
        ref = oracles.classical_water_fill_rate(gains, config.power_budget_w[0])
        assert got <= ref + 1e-9
        assert got >= 0.9 * ref


class TestGreedy:
    def test_stronger_user_decodes_first(self):
        stats = ree.synthetic_stats(8, [2, 2], seed=1, pathloss_db=20.0)
        tilted = ree.ChannelStats(
            coupling=(4.0 * stats.coupling[1], stats.coupling[1]),
            bs_basis=stats.bs_basis, user_basis=stats.user_basis)
        cfg = two_user_config()
        order = greedy_order(tilted, cfg, ())
        assert order.sequence == ((0, 0), (0, 1), (1, 0), (1, 1))
        flipped = ree.ChannelStats(
            coupling=(stats.coupling[1], 4.0 * stats.coupling[1]),
            bs_basis=stats.bs_basis, user_basis=stats.user_basis)
        assert greedy_order(flipped, cfg, ()).sequence == (
            (1, 0), (1, 1), (0, 0), (0, 1))

    def test_tie_breaks_by_user_index(self):
        stats = ree.synthetic_stats(8, [2, 2], seed=2, pathloss_db=20.0)
        same = ree.ChannelStats(coupling=(stats.coupling[0], stats.coupling[0]),
                                bs_basis=stats.bs_basis,
                                user_basis=(stats.user_basis[0],) * 2)
        order = greedy_order(same, two_user_config(), ())
        assert order.sequence == ((0, 0), (0, 1), (1, 0), (1, 1))

    def test_single_user_is_identity(self):
        stats = ree.synthetic_stats(8, [2], seed=3, pathloss_db=20.0)
        cfg = ree.SystemConfig(num_users=1, num_layers=2, bs_antennas=8,
                               user_antennas=2, bandwidth_hz=1.0,
                               noise_power_w=1.0, amplifier_inefficiency=5.0,
                               circuit_power_w=1.0, bs_power_w=10.0,
                               power_budget_w=1.0, sar_budget_w_per_kg=())
        assert greedy_order(stats, cfg, ()).sequence == ((0, 0), (0, 1))


class TestExhaustive:
    def test_visits_every_permutation(self, monkeypatch):
        stats = ree.synthetic_stats(8, [2, 2], seed=4, pathloss_db=20.0)
        cfg = two_user_config(num_layers=1)
        seen = []
        real = ordering_mod.solve_inner

        def spy(*args, **kwargs):
            seen.append(args[1].sequence)
            return real(*args, **kwargs)

        monkeypatch.setattr(ordering_mod, "solve_inner", spy)
        exhaustive_order(stats, cfg, ())
        assert len(seen) == 2
        assert set(seen) == {((0, 0), (1, 0)), ((1, 0), (0, 0))}

    def test_never_below_greedy(self, desk):
        stats, config, constraints, order = desk
        best_order, best = exhaustive_order(stats, config, constraints)
        greedy = solve(stats, config, constraints, method="greedy")
        assert best.ee_bits_per_joule >= greedy.ee_bits_per_joule - 1e-9
        gap = (best.ee_bits_per_joule - greedy.ee_bits_per_joule) / \
            best.ee_bits_per_joule
        assert gap <= 0.02

    def test_cap_refuses_large_instances(self):
        stats = ree.synthetic_stats(8, [2] * 5, seed=0)
        cfg = ree.SystemConfig(num_users=5, num_layers=2, bs_antennas=8,
                               user_antennas=2, bandwidth_hz=1.0,
                               noise_power_w=1.0, amplifier_inefficiency=5.0,
                               circuit_power_w=1.0, bs_power_w=10.0,
                               power_budget_w=1.0, sar_budget_w_per_kg=())
        with pytest.raises(ValueError, match="exceeds the cap"):
            exhaustive_order(stats, cfg, ())
        assert EXHAUSTIVE_CAP == 40320


class TestSolve:
    def test_zero_coupling_zero_efficiency(self):
        z = np.zeros((4, 2))
        stats = ree.ChannelStats(coupling=(z, z),
                                 bs_basis=np.eye(4, dtype=complex),
                                 user_basis=(np.eye(2, dtype=complex),) * 2)
        cfg = two_user_config(bs_antennas=4)
        out = solve(stats, cfg, ())
        assert out.ee_bits_per_joule == 0.0
        assert all(r == 0.0 for r in out.rates.values())
        assert out.result.feasibility.feasible

    def test_fixed_order_equals_direct_inner_solve(self, desk):
        stats, config, constraints, _ = desk
        order = ree.DecodingOrder.from_user_sequence([1, 0], 2)
        via_solve = solve(stats, config, constraints, method="fixed",
                          fixed_order=order)
        direct = ree.solve_inner(stats, order, config, constraints)
        assert via_solve.ee_bits_per_joule == direct.ee_bits_per_joule
        assert all(np.array_equal(via_solve.q[p], direct.q[p])
                   for p in order.sequence)

    def test_fixed_needs_an_order(self, desk):
        stats, config, constraints, _ = desk
        with pytest.raises(ValueError, match="fixed_order"):
            solve(stats, config, constraints, method="fixed")

    def test_unknown_method(self, desk):
        stats, config, constraints, _ = desk
        with pytest.raises(ValueError, match="unknown ordering method"):
            solve(stats, config, constraints, method="simulated-annealing")

    def test_greedy_records_single_user_rates(self, desk):
        stats, config, constraints, _ = desk
        out = solve(stats, config, constraints, method="greedy")
        assert out.method == "greedy"
        assert len(out.single_user_rates) == 2
        assert all(r > 0 for r in out.single_user_rates)
        ranked = sorted(range(2), key=lambda k: (-out.single_user_rates[k], k))
        assert out.order.sequence == ree.DecodingOrder.from_user_sequence(
            ranked, 2).sequence

    def test_user_relabel_symmetry(self):
        # swapping the two users' statistics mirrors the chosen sequence and
        # preserves the efficiency
        stats = ree.synthetic_stats(8, [2, 2], seed=6, pathloss_db=20.0)
        cfg = two_user_config()
        swapped = ree.ChannelStats(
            coupling=(stats.coupling[1], stats.coupling[0]),
            bs_basis=stats.bs_basis,
            user_basis=(stats.user_basis[1], stats.user_basis[0]))
        a = solve(stats, cfg, ())
        b = solve(swapped, cfg, ())
        # the sweep visits users in index order, so the float paths differ
        assert a.ee_bits_per_joule == pytest.approx(b.ee_bits_per_joule,
                                                    rel=1e-6)
        relabel = {0: 1, 1: 0}
        assert tuple((relabel[k], l) for k, l in a.order.sequence) == \
            b.order.sequence
