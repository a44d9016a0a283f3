"""Probability primitives: construction guards, entropy and mutual
information values, and their standard inequalities."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from smartleak.core import (
    ConditionalPmf,
    GridModel,
    INFINITE,
    Pmf,
    binary_entropy,
    entropy,
    expected_battery_draw,
    mutual_information,
)


def random_pmf(rng, size):
    probs = rng.dirichlet(np.ones(size))
    return Pmf(probs)


def random_channel(rng, size):
    return ConditionalPmf(rng.dirichlet(np.ones(size), size=size))


class TestPmf:
    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            Pmf(np.array([1.2, -0.2]))

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            Pmf(np.array([0.5, 0.5 + 1e-9]))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            Pmf(np.array([]))

    def test_immutable(self):
        p = Pmf.bernoulli(0.3)
        with pytest.raises(ValueError):
            p.probs[0] = 0.9

    def test_mean(self):
        assert Pmf.bernoulli(0.3).mean() == pytest.approx(0.3)
        assert Pmf.binomial(4, 0.25).mean() == pytest.approx(1.0)


class TestConditionalPmf:
    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            ConditionalPmf(np.array([[0.5, 0.5]]))

    def test_rejects_bad_row(self):
        with pytest.raises(ValueError):
            ConditionalPmf(np.array([[0.5, 0.6], [0.5, 0.5]]))


class TestGridModel:
    def test_rejects_generation_above_peak(self):
        with pytest.raises(ValueError):
            GridModel(
                p_X=Pmf(np.array([0.2, 0.2, 0.6])),
                p_E=Pmf(np.array([0.0, 0.0, 1.0])),
                b_max=1,
                p_hat=1,
            )

    def test_rejects_trivial_demand(self):
        with pytest.raises(ValueError):
            GridModel(p_X=Pmf(np.array([1.0])), p_E=Pmf.bernoulli(0.2), b_max=0, p_hat=1)

    def test_infinite_sentinel(self):
        m = GridModel(p_X=Pmf.bernoulli(0.5), p_E=Pmf.bernoulli(0.5), b_max=INFINITE, p_hat=1)
        assert m.infinite_battery
        with pytest.raises(ValueError):
            m.soc_states


class TestEntropy:
    def test_uniform_binary_is_one_bit(self):
        assert entropy(Pmf.bernoulli(0.5)) == pytest.approx(1.0, abs=1e-12)

    def test_point_mass_is_zero(self):
        assert entropy(Pmf.point_mass(0, 3)) == 0.0

    def test_quarter_three_quarters(self):
        # h(0.25) evaluated by hand
        assert entropy(Pmf(np.array([0.75, 0.25]))) == pytest.approx(0.811278, abs=1e-6)

    def test_binary_entropy_domain(self):
        with pytest.raises(ValueError):
            binary_entropy(1.001)
        assert binary_entropy(1.0 + 1e-13) == 0.0

    @given(st.floats(0.0, 1.0), st.integers(2, 6), st.integers(0, 10 ** 6))
    def test_concave_under_mixing(self, lam, size, seed):
        rng = np.random.default_rng(seed)
        p = random_pmf(rng, size)
        q = random_pmf(rng, size)
        mix = Pmf(lam * p.probs + (1 - lam) * q.probs)
        assert entropy(mix) >= lam * entropy(p) + (1 - lam) * entropy(q) - 1e-9


class TestMutualInformation:
    def test_identity_channel(self):
        assert mutual_information(
            Pmf.bernoulli(0.5), ConditionalPmf.identity(2)
        ) == pytest.approx(1.0, abs=1e-12)

    def test_identical_rows_independent(self):
        ch = ConditionalPmf(np.array([[0.3, 0.7], [0.3, 0.7]]))
        assert mutual_information(Pmf.bernoulli(0.5), ch) == pytest.approx(0.0, abs=1e-12)

    def test_half_noisy_row(self):
        # equals h(0.75) - 0.5, evaluated by hand
        ch = ConditionalPmf(np.array([[1.0, 0.0], [0.5, 0.5]]))
        assert mutual_information(Pmf.bernoulli(0.5), ch) == pytest.approx(
            0.311278, abs=1e-6
        )

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            mutual_information(Pmf.bernoulli(0.5), ConditionalPmf.identity(3))

    @pytest.mark.parametrize("seed", range(8))
    def test_bounds_and_symmetric_form(self, seed):
        rng = np.random.default_rng(seed)
        size = rng.integers(2, 5)
        p = random_pmf(rng, size)
        ch = random_channel(rng, size)
        mi = mutual_information(p, ch)
        assert 0.0 <= mi <= entropy(p) + 1e-12
        # H(X) - H(X|Y) through the joint must agree
        joint = p.probs[:, None] * ch.matrix
        py = joint.sum(axis=0)
        h_joint = -np.sum(joint[joint > 0] * np.log2(joint[joint > 0]))
        h_y = -np.sum(py[py > 0] * np.log2(py[py > 0]))
        assert mi == pytest.approx(entropy(p) - (h_joint - h_y), abs=1e-9)

    @pytest.mark.parametrize("seed", range(6))
    def test_zero_iff_rows_identical(self, seed):
        rng = np.random.default_rng(100 + seed)
        size = int(rng.integers(2, 4))
        p = random_pmf(rng, size)
        row = rng.dirichlet(np.ones(size))
        same = ConditionalPmf(np.tile(row, (size, 1)))
        assert mutual_information(p, same) == pytest.approx(0.0, abs=1e-12)
        ch = random_channel(rng, size)
        spread = np.ptp(ch.matrix[p.probs > 0], axis=0).max()
        if spread > 1e-3:
            assert mutual_information(p, ch) > 0.0


class TestExpectedBatteryDraw:
    def test_identity_draws_nothing(self):
        assert expected_battery_draw(Pmf.bernoulli(0.5), ConditionalPmf.identity(2)) == 0.0

    def test_always_mask_unit_demand(self):
        ch = ConditionalPmf(np.array([[1.0, 0.0], [1.0, 0.0]]))
        assert expected_battery_draw(Pmf.bernoulli(0.5), ch) == pytest.approx(0.5)

    def test_half_mask(self):
        ch = ConditionalPmf(np.array([[1.0, 0.0], [0.5, 0.5]]))
        assert expected_battery_draw(Pmf.bernoulli(0.5), ch) == pytest.approx(0.25)

    def test_rejects_mass_above_demand(self):
        ch = ConditionalPmf(np.array([[0.5, 0.5], [0.0, 1.0]]))
        with pytest.raises(ValueError):
            expected_battery_draw(Pmf.bernoulli(0.5), ch)
