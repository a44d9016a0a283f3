"""Continuous-demand lower bounds: max-entropy fits, formula identities
and dominance against the quantized solver."""

import math

import numpy as np
import pytest

from smartleak.core import Pmf, entropy
from smartleak.privacy_power import ppf
from smartleak.slb import (
    fit_trunc_exp,
    slb_avg_peak,
    slb_peak_only,
    slb_peak_random,
    trunc_exp_entropy_bits,
)


def density_entropy_and_mean(params, points=400_001):
    """Quadrature oracle: integral, mean and entropy of the fitted density."""
    if params.uniform_limit:
        xs = np.linspace(0.0, params.p_hat, points)
        f = np.full_like(xs, 1.0 / params.p_hat)
    else:
        # resolve the decay scale; the tail beyond 60 scales is negligible
        hi = min(params.p_hat, 60.0 * params.lambda1)
        xs = np.linspace(0.0, hi, points)
        f = np.exp(-xs / params.lambda1) / params.lambda0
    integral = np.trapezoid(f, xs)
    mean = np.trapezoid(xs * f, xs)
    h_bits = -np.trapezoid(f * np.log2(f), xs)
    return integral, mean, h_bits


class TestFitTruncExp:
    def test_mean_and_mass_by_quadrature(self):
        params = fit_trunc_exp(0.25, 1.0)
        integral, mean, h = density_entropy_and_mean(params)
        assert integral == pytest.approx(1.0, abs=1e-9)
        assert mean == pytest.approx(0.25, abs=1e-9)
        assert h == pytest.approx(trunc_exp_entropy_bits(params), abs=1e-8)

    def test_symmetric_mean_gives_uniform(self):
        params = fit_trunc_exp(0.5, 1.0)
        assert params.uniform_limit
        assert trunc_exp_entropy_bits(params) == pytest.approx(math.log2(1.0))
        params2 = fit_trunc_exp(2.0, 4.0)
        assert trunc_exp_entropy_bits(params2) == pytest.approx(2.0)

    def test_unbounded_peak_reduces_to_exponential(self):
        params = fit_trunc_exp(1.0, math.inf)
        assert params.lambda1 == pytest.approx(1.0)
        assert params.lambda0 == pytest.approx(1.0)

    def test_infeasible_direction(self):
        with pytest.raises(ValueError):
            fit_trunc_exp(1.0, 1.0)
        with pytest.raises(ValueError):
            fit_trunc_exp(0.0, 1.0)

    def test_round_trip_refit(self):
        params = fit_trunc_exp(0.3, 2.0)
        _, mean, _ = density_entropy_and_mean(params)
        refit = fit_trunc_exp(mean, 2.0)
        assert refit.lambda1 == pytest.approx(params.lambda1, abs=1e-6)

    @pytest.mark.parametrize("p_bar", [1e-3, 0.1, 0.49, 0.4999999])
    def test_close_to_uniform_is_stable(self, p_bar):
        params = fit_trunc_exp(p_bar, 1.0)
        if not params.uniform_limit:
            integral, mean, _ = density_entropy_and_mean(params)
            assert integral == pytest.approx(1.0, abs=1e-7)
            assert mean == pytest.approx(p_bar, abs=1e-7)


class TestSlbAvgPeak:
    def test_exponential_input_is_tight_at_zero(self):
        h_x = math.log2(math.e)  # differential entropy of a unit-mean exponential
        assert slb_avg_peak(h_x, 1.0, math.inf) == pytest.approx(0.0, abs=1e-12)

    def test_vanishing_budget_approaches_demand_entropy(self):
        h_x = 2.0
        vals = [slb_avg_peak(h_x, p_bar, 1.0) for p_bar in (1e-2, 1e-4, 1e-6)]
        assert vals == sorted(vals)
        # tiny budgets stop masking: the bound climbs without cap
        assert vals[-1] > h_x

    def test_quadrature_identity(self):
        h_x = 2.0
        params = fit_trunc_exp(0.5, 1.0)
        _, _, h_fit = density_entropy_and_mean(params)
        assert slb_avg_peak(h_x, 0.5, 1.0) == pytest.approx(h_x - h_fit, abs=1e-8)

    def test_non_increasing_in_mean_budget(self):
        h_x = 1.5
        grid = np.linspace(0.05, 0.95, 10)
        vals = [slb_avg_peak(h_x, b, 2.0) for b in grid]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


class TestSlbPeakOnly:
    def test_full_range_masking(self):
        assert slb_peak_only(1.0, 2.0) == pytest.approx(0.0)

    def test_unit_peak_is_identity(self):
        assert slb_peak_only(1.5, 1.0) == pytest.approx(1.5)

    def test_sub_unit_peak_exceeds_entropy(self):
        # reported as-is even above operational values
        assert slb_peak_only(1.5, 0.5) == pytest.approx(2.5)

    def test_domain(self):
        with pytest.raises(ValueError):
            slb_peak_only(1.0, 0.0)


class TestSlbPeakRandom:
    def test_point_mass_matches_peak_only(self):
        dist = Pmf.point_mass(2, 3)
        assert slb_peak_random(1.7, dist) == pytest.approx(slb_peak_only(1.7, 2.0))

    def test_two_point_average(self):
        dist = Pmf(np.array([0.0, 0.5, 0.5]))
        assert slb_peak_random(1.0, dist) == pytest.approx(0.5)

    def test_matched_entropy_gives_zero(self):
        dist = Pmf.point_mass(4, 5)
        assert slb_peak_random(2.0, dist) == pytest.approx(0.0)

    def test_zero_budget_atom_contributes_full_entropy(self):
        dist = Pmf(np.array([0.25, 0.75]))
        assert slb_peak_random(1.0, dist) == pytest.approx(0.25 * 1.0 + 0.75 * 1.0)

    def test_real_valued_support(self):
        dist = Pmf(np.array([0.5, 0.5]))
        got = slb_peak_random(1.0, dist, support=[1.0, 2.0])
        assert got == pytest.approx(0.5 * 1.0 + 0.5 * 0.0)

    def test_negative_support_rejected(self):
        with pytest.raises(ValueError):
            slb_peak_random(1.0, Pmf(np.array([0.5, 0.5])), support=[-1.0, 2.0])


def discretized_exponential(mean, quantum, span=10.0):
    count = int(span * mean / quantum)
    edges = np.arange(count + 1) * quantum
    mass = np.exp(-edges / mean) - np.append(np.exp(-edges[1:] / mean), 0.0)
    return Pmf(mass / mass.sum())


class TestQuantizedDominance:
    @pytest.mark.parametrize("quantum", [1 / 8, 1 / 16])
    def test_bound_below_quantized_solution(self, quantum):
        p_bar, p_hat = 0.5, 1.0
        p_X = discretized_exponential(1.0, quantum)
        h_x = entropy(p_X) + math.log2(quantum)
        bound = slb_avg_peak(h_x, p_bar, p_hat)
        solved = ppf(p_X, p_bar / quantum, int(p_hat / quantum), tol=1e-8).leakage_bits
        assert bound <= solved + 2 * quantum
