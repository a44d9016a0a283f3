"""Policy parameter searches: scan, stochastic gradient and grid search."""

import numpy as np
import pytest

from smartleak.core import GridModel, Pmf, entropy
from smartleak.policy_opt import (
    ScanPvResult,
    SgdOptions,
    scan_pv,
    search_three_level,
    sgd_battery_conditioned,
)
from smartleak.privacy_power import ppf, ppf_zero_known


def binary_model(q_x, p_e, b_max):
    return GridModel(
        p_X=Pmf.bernoulli(q_x), p_E=Pmf.bernoulli(p_e), b_max=b_max, p_hat=1
    )


class TestScanPv:
    def test_no_generation_ties_break_upward(self):
        res = scan_pv(binary_model(0.5, 0.0, 1), 0.25, n=5_000, seeds=2)
        assert res.best_p_v == 1.0
        leaks = {leak for _, leak, _ in res.curve}
        assert leaks == {1.0}  # every candidate leaks the demand entropy exactly

    def test_no_storage_prefers_full_masking(self):
        res = scan_pv(binary_model(0.5, 0.5, 0), 0.25, n=200_000, seeds=5)
        assert res.best_p_v == 1.0
        assert abs(res.best_leakage - 0.311278) <= 3 * res.best_std_error + 2e-3

    def test_high_generation_prefers_full_masking(self):
        res = scan_pv(binary_model(0.5, 0.9, 2), 0.1, n=100_000, seeds=4)
        assert res.best_p_v == 1.0

    def test_grid_step_domain(self):
        with pytest.raises(ValueError):
            scan_pv(binary_model(0.5, 0.5, 1), 0.6)

    def test_curve_covers_unit_interval(self):
        res = scan_pv(binary_model(0.5, 0.5, 1), 0.5, n=2_000, seeds=2)
        assert [pv for pv, _, _ in res.curve] == [0.0, 0.5, 1.0]
        assert isinstance(res, ScanPvResult)


class TestSgd:
    def test_single_state_recovers_full_masking(self):
        model = binary_model(0.5, 0.5, 0)
        opts = SgdOptions(probes=6, max_iterations=40, stop_threshold=1e-4)
        res = sgd_battery_conditioned(model, [0.5], opts, n=150_000, seeds=4)
        assert res.p_v_vec[0] >= 0.95
        assert all(0.0 <= v <= 1.0 for v in res.p_v_vec)

    def test_never_worse_than_scan_initialization(self):
        model = binary_model(0.5, 0.3, 1)
        scan = scan_pv(model, 0.2, n=60_000, seeds=4)
        opts = SgdOptions(probes=8, max_iterations=8)
        res = sgd_battery_conditioned(
            model, [scan.best_p_v] * 2, opts, n=60_000, seeds=4
        )
        assert res.leakage <= scan.best_leakage + 3 * (
            res.std_error + scan.best_std_error
        ) + 1e-9

    def test_best_so_far_trace_is_monotone(self):
        model = binary_model(0.5, 0.4, 1)
        opts = SgdOptions(probes=6, max_iterations=6, stop_threshold=0.0)
        res = sgd_battery_conditioned(model, [0.3, 0.3], opts, n=20_000, seeds=2)
        bests = [row[4] for row in res.trace]
        assert all(b <= a + 1e-12 for a, b in zip(bests, bests[1:]))
        assert not res.converged  # zero threshold never triggers the stop rule

    def test_rejects_wrong_init_length(self):
        with pytest.raises(ValueError):
            sgd_battery_conditioned(binary_model(0.5, 0.5, 2), [0.5], SgdOptions())

    def test_bracketed_by_theory(self):
        q_x, p_e = 0.5, 0.4
        model = binary_model(q_x, p_e, 1)
        scan = scan_pv(model, 0.1, n=100_000, seeds=4)
        opts = SgdOptions(probes=8, max_iterations=10)
        res = sgd_battery_conditioned(
            model, [scan.best_p_v] * 2, opts, n=100_000, seeds=4
        )
        lower = ppf(model.p_X, p_e, 1).leakage_bits
        upper = ppf_zero_known(model.p_X, model.p_E)
        assert res.leakage >= lower - 3 * res.std_error - 1e-6
        assert res.leakage <= upper + 3 * res.std_error + 1e-6


class TestThreeLevelSearch:
    def test_no_generation_all_tie_at_entropy(self):
        model = GridModel(
            p_X=Pmf(np.array([0.5, 0.5])), p_E=Pmf.point_mass(0, 2), b_max=1, p_hat=1
        )
        res = search_three_level(model, 0.5, n=4_000, seeds=2)
        assert res.leakage == pytest.approx(entropy(model.p_X), abs=2e-2)

    def test_binary_embedding_matches_scan(self):
        model = binary_model(0.5, 0.5, 1)
        scan = scan_pv(model, 0.5, n=60_000, seeds=4)
        res = search_three_level(model, 0.5, n=60_000, seeds=4)
        assert res.leakage <= scan.best_leakage + 3 * (
            res.std_error + scan.best_std_error
        ) + 1e-9
        assert res.evaluations == 6**3

    def test_five_level_instance_within_bounds(self):
        p_X = Pmf.uniform(5)
        p_E = Pmf.binomial(4, 0.4)
        model = GridModel(p_X=p_X, p_E=p_E, b_max=2, p_hat=4)
        res = search_three_level(model, 0.5, n=10_000, seeds=2)
        lower = ppf(p_X, p_E.mean(), 4).leakage_bits
        upper = ppf_zero_known(p_X, p_E)
        assert lower - 3 * res.std_error - 5e-3 <= res.leakage
        assert res.leakage <= upper + 3 * res.std_error + 5e-3

    def test_grid_step_must_divide_one(self):
        with pytest.raises(ValueError):
            search_three_level(binary_model(0.5, 0.5, 1), 0.3)
