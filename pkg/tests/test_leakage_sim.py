"""Simulation estimator against closed forms and the enumeration oracle,
plus the storage-phase experiments."""

import math

import numpy as np
import pytest

from smartleak import binary
from smartleak._kernels import forward_rate
from smartleak.core import ConditionalPmf, GridModel, INFINITE, Pmf, entropy
from smartleak.leakage_sim import (
    brute_force_rate,
    estimate_leakage,
    outage_experiment,
    random_walk_experiment,
    simulate_best_effort,
)
from smartleak.policies import BatteryIndependent, ThreeLevel


def binary_model(q_x, p_e, b_max):
    return GridModel(
        p_X=Pmf.bernoulli(q_x), p_E=Pmf.bernoulli(p_e), b_max=b_max, p_hat=1
    )


class TestEstimateLeakage:
    def test_no_storage_matches_closed_form(self):
        est = estimate_leakage(binary_model(0.5, 0.5, 0), BatteryIndependent(0.6),
                               n=200_000, seeds=6)
        expect = binary.leak_zero_unknown(0.5, 0.6, 0.5)
        assert abs(est.bits_per_slot - expect) <= 3 * est.std_error + 1e-3

    def test_never_masking_leaks_demand_entropy(self):
        est = estimate_leakage(binary_model(0.4, 0.5, 1), BatteryIndependent(0.0),
                               n=100_000, seeds=4)
        expect = entropy(Pmf.bernoulli(0.4))
        assert abs(est.bits_per_slot - expect) <= 3 * est.std_error + 1e-9

    def test_no_generation_leaks_demand_entropy(self):
        est = estimate_leakage(binary_model(0.5, 0.0, 2), BatteryIndependent(1.0),
                               n=100_000, seeds=4)
        assert est.bits_per_slot == pytest.approx(1.0, abs=1e-12)

    def test_rate_decomposition_is_exact(self):
        est = estimate_leakage(binary_model(0.5, 0.3, 1), BatteryIndependent(0.8),
                               n=50_000, seeds=3)
        assert est.bits_per_slot == pytest.approx(
            est.hy_rate - est.hy_given_x_rate, abs=1e-12
        )
        assert len(est.per_seed) == 3
        assert est.bits_per_slot >= -3 * est.std_error
        assert est.bits_per_slot <= 1.0 + 3 * est.std_error

    def test_reproducible_given_seed(self):
        a = estimate_leakage(binary_model(0.5, 0.4, 1), BatteryIndependent(0.7),
                             n=20_000, seeds=2, base_seed=9)
        b = estimate_leakage(binary_model(0.5, 0.4, 1), BatteryIndependent(0.7),
                             n=20_000, seeds=2, base_seed=9)
        assert a == b

    def test_rejects_unbounded_battery(self):
        with pytest.raises(ValueError):
            estimate_leakage(binary_model(0.5, 0.4, INFINITE), BatteryIndependent(0.7))

    def test_zero_probability_observation_is_loud(self):
        ops = np.zeros((2, 1, 1))
        ops[0, 0, 0] = 1.0  # symbol 1 can never occur
        assert math.isnan(forward_rate(ops, np.array([0, 1, 0]), 0))

    def test_forward_recursion_matches_path_enumeration(self):
        # independent oracle: P(y^n) as an explicit sum over battery paths
        model = binary_model(0.5, 0.4, 1)
        policy = BatteryIndependent(0.6)
        from smartleak.leakage_sim import _forward_operators, _sampler_tables
        from smartleak.policies import build_chain
        from smartleak._kernels import simulate_chain

        chain = build_chain(model, policy)
        ops_y, _, _ = _forward_operators(chain, model.p_X)
        rng = np.random.default_rng(4)
        u = rng.random(12)
        tables = _sampler_tables(chain)
        _, ys = simulate_chain(*tables, u, 0)
        rate = forward_rate(ops_y, ys, 0)

        def prob_by_paths(t, b):
            if t == len(ys):
                return 1.0
            return sum(
                ops_y[ys[t], b, b2] * prob_by_paths(t + 1, b2)
                for b2 in range(chain.n_states)
            )

        exact = prob_by_paths(0, 0)
        assert rate == pytest.approx(-math.log2(exact) / len(ys), abs=1e-9)


class TestBruteForce:
    def test_single_slot_is_single_letter(self):
        for p_v in (0.35, 1.0):
            got = brute_force_rate(binary_model(0.5, 0.5, 0), BatteryIndependent(p_v), 1)
            assert got == pytest.approx(
                binary.leak_zero_unknown(0.5, p_v, 0.5), abs=1e-12
            )

    def test_passthrough_leaks_entropy(self):
        got = brute_force_rate(binary_model(0.3, 0.5, 1), BatteryIndependent(0.0), 3)
        assert got == pytest.approx(entropy(Pmf.bernoulli(0.3)), abs=1e-12)

    def test_estimator_mean_matches_enumeration(self):
        model = binary_model(0.5, 0.5, 1)
        policy = BatteryIndependent(0.7)
        exact = brute_force_rate(model, policy, 8)
        est = estimate_leakage(model, policy, n=8, seeds=30_000)
        assert abs(est.bits_per_slot - exact) <= 4 * est.std_error + 2e-3

    def test_three_level_supported(self):
        model = GridModel(
            p_X=Pmf(np.array([0.4, 0.3, 0.3])),
            p_E=Pmf(np.array([0.5, 0.5])),
            b_max=1,
            p_hat=2,
        )
        policy = ThreeLevel(p_full=(0.5, 0.5, 0.5), p_half=(0.2, 0.2, 0.2))
        got = brute_force_rate(model, policy, 2)
        est = estimate_leakage(model, policy, n=2, seeds=40_000)
        assert abs(est.bits_per_slot - got) <= 4 * est.std_error + 2e-3

    def test_horizon_guard(self):
        with pytest.raises(ValueError):
            brute_force_rate(binary_model(0.5, 0.5, 1), BatteryIndependent(0.5), 13)


class TestOutage:
    def test_identity_channel_never_outages(self):
        model = binary_model(0.5, 0.5, INFINITE)
        frac = outage_experiment(model, ConditionalPmf.identity(2), n=10_000)
        assert frac == 0.0

    def test_fraction_decays_with_horizon(self):
        model = binary_model(0.5, 0.25, INFINITE)
        ch = ConditionalPmf(np.array([[1.0, 0.0], [0.4, 0.6]]))
        f3 = outage_experiment(model, ch, 1_000, seeds=10)
        f5 = outage_experiment(model, ch, 100_000, seeds=10)
        assert f5 <= f3 + 1e-9
        assert f5 < 1e-2

    def test_drift_precondition(self):
        model = binary_model(0.5, 0.15, INFINITE)  # mean draw 0.2 > 0.15
        ch = ConditionalPmf(np.array([[1.0, 0.0], [0.4, 0.6]]))
        with pytest.raises(ValueError):
            outage_experiment(model, ch, 1_000)


class TestRandomWalk:
    def test_monotone_walk_never_crosses(self):
        model = binary_model(0.5, 1.0, INFINITE)  # always generates a quantum
        ch = ConditionalPmf.identity(2)  # never draws: Q = E = 1 deterministically
        res = random_walk_experiment(model, ch, s_n=50, n=1_000, trials=500)
        assert res.crossing_fraction == 0.0
        assert res.wald_bound == 0.0

    def test_bound_squares_when_storage_doubles(self):
        model = binary_model(0.5, 0.25, INFINITE)
        ch = ConditionalPmf(np.array([[1.0, 0.0], [0.4, 0.6]]))
        r1 = random_walk_experiment(model, ch, s_n=100, n=2_000, trials=200)
        r2 = random_walk_experiment(model, ch, s_n=200, n=2_000, trials=200)
        assert r2.wald_bound == pytest.approx(r1.wald_bound**2, rel=1e-9)

    def test_empirical_below_bound(self):
        model = binary_model(0.5, 0.25, INFINITE)
        ch = ConditionalPmf(np.array([[1.0, 0.0], [0.4, 0.6]]))
        res = random_walk_experiment(model, ch, s_n=100, n=5_000, trials=5_000)
        sigma = math.sqrt(
            max(res.crossing_fraction * (1 - res.crossing_fraction), 0.0) / res.trials
        )
        assert res.crossing_fraction <= res.wald_bound + 3 * sigma + 1e-12

    def test_wrong_drift_rejected(self):
        model = binary_model(0.5, 0.15, INFINITE)
        ch = ConditionalPmf(np.array([[1.0, 0.0], [0.4, 0.6]]))
        with pytest.raises(ValueError):
            random_walk_experiment(model, ch, s_n=100, n=1_000, trials=100)


class TestBestEffortSimulation:
    def test_feasible_and_counts_outages(self):
        model = binary_model(0.5, 0.3, INFINITE)
        ch = ConditionalPmf(np.array([[1.0, 0.0], [0.5, 0.5]]))
        xs, ys, bs, outages = simulate_best_effort(model, ch, 5_000, seed=1)
        assert np.all(ys <= xs)
        assert np.all(bs >= 0)
        assert 0 <= outages <= 5_000
