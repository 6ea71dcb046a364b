"""
Tests for formal power series, star sums, Lagrange inversion and Lambert W.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lamperti.errors import ParameterError
from lamperti.laws import make_target
from lamperti.series import (
    PowerSeries,
    evaluate_inverse,
    fps_exp,
    fps_log,
    fps_mul,
    fps_pow,
    fps_reciprocal,
    lagrange_inverse_coeffs,
    lambert_w,
    lambert_w_scaled,
    star_coeff,
)


class TestPowerSeries:
    """Construction, padding and truncation rules."""

    def test_order_pads_with_zeros(self):
        s = PowerSeries([1.0, 2.0], order=4)
        assert s.order == 4
        np.testing.assert_array_equal(s.coeffs, [1.0, 2.0, 0.0, 0.0, 0.0])

    def test_coefficients_are_read_only(self):
        s = PowerSeries([1.0, 2.0])
        with pytest.raises(ValueError):
            s.coeffs[0] = 3.0

    def test_index_beyond_order_raises(self):
        with pytest.raises(IndexError):
            PowerSeries([1.0])[3]

    def test_empty_series_rejected(self):
        with pytest.raises(ParameterError):
            PowerSeries([])


class TestArithmetic:
    """Truncated products, reciprocals, log, exp and powers."""

    def test_difference_of_squares(self):
        a = PowerSeries([1.0, 1.0], order=2)
        b = PowerSeries([1.0, -1.0], order=2)
        np.testing.assert_allclose(fps_mul(a, b, 2).coeffs, [1.0, 0.0, -1.0])

    def test_multiplying_by_one_is_identity(self):
        a = PowerSeries([0.3, -1.2, 4.0, 0.5])
        one = PowerSeries([1.0], order=a.order)
        np.testing.assert_array_equal(fps_mul(a, one, a.order).coeffs, a.coeffs)

    def test_geometric_square(self):
        p = q = 0.5
        a = PowerSeries(p * q ** np.arange(4))
        np.testing.assert_allclose(fps_mul(a, a, 3).coeffs, [0.25, 0.25, 0.1875, 0.125], rtol=1e-15)

    def test_order_beyond_input_raises(self):
        with pytest.raises(ParameterError):
            fps_mul(PowerSeries([1.0, 1.0]), PowerSeries([1.0, 1.0, 1.0]), 2)

    def test_reciprocal_of_one_minus_z(self):
        np.testing.assert_allclose(fps_reciprocal(PowerSeries([1.0, -1.0], order=5), 5).coeffs, np.ones(6))

    def test_reciprocal_needs_constant_term(self):
        with pytest.raises(ParameterError):
            fps_reciprocal(PowerSeries([0.0, 1.0]), 1)

    def test_power_minus_one_is_geometric(self):
        s = fps_pow(PowerSeries([1.0, -0.5], order=3), -1, 3)
        np.testing.assert_allclose(s.coeffs, [1.0, 0.5, 0.25, 0.125], rtol=1e-15)

    def test_power_constant_term(self):
        s = fps_pow(PowerSeries([4.0, 1.0, 2.0]), 0.5, 2)
        assert s[0] == pytest.approx(2.0)

    def test_log_needs_positive_constant(self):
        with pytest.raises(ParameterError):
            fps_log(PowerSeries([-1.0, 1.0]), 1)

    def test_exp_needs_zero_constant(self):
        with pytest.raises(ParameterError):
            fps_exp(PowerSeries([0.5, 1.0]), 1)

    def test_shifted_poisson_negative_power(self):
        lam, n = 0.7, 5
        k = np.arange(n)
        psi = PowerSeries(np.exp(-lam) * lam ** k / np.array([math.factorial(int(v)) for v in k]))
        coeff = fps_pow(psi, -n, n - 1)[n - 1]
        expected = math.exp(lam * n) * (-n * lam) ** (n - 1) / math.factorial(n - 1)
        assert coeff == pytest.approx(expected, rel=1e-10)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1.0, 2.0), st.lists(st.floats(0.0, 0.5), min_size=1, max_size=12))
    def test_exp_inverts_log(self, c0, rest):
        a = PowerSeries([c0] + rest)
        log_a = fps_log(a, a.order)
        shifted = log_a - log_a[0]
        back = fps_exp(shifted, a.order) * a[0]
        np.testing.assert_allclose(back.coeffs, a.coeffs, rtol=1e-10, atol=1e-10)


class TestStarCoefficients:
    """Partition-enumerated star sums."""

    RATIOS = [1.0, 0.3, 0.2, 0.1]

    def test_first_coefficient(self):
        assert star_coeff(self.RATIOS, 1, 0) == 1.0

    def test_single_part(self):
        assert star_coeff(self.RATIOS, 2, 1) == pytest.approx(0.3)

    def test_two_parts_summing_to_three(self):
        assert star_coeff(self.RATIOS, 4, 2) == pytest.approx(0.3 * 0.2)

    def test_repeated_parts_use_factorials(self):
        # partitions of 2 into 2 parts: {1, 1} only
        assert star_coeff(self.RATIOS, 3, 2) == pytest.approx(0.3 ** 2 / 2)

    def test_k_out_of_range(self):
        with pytest.raises(ParameterError):
            star_coeff(self.RATIOS, 3, 3)

    def test_enumeration_cap(self):
        with pytest.raises(ParameterError):
            star_coeff(self.RATIOS, 40, 3)


class TestLagrangeInversion:
    """Coefficients of the compositional inverse of z Psi(z)."""

    def test_geometric_target(self):
        p, q, n_max = 0.6, 0.4, 15
        psi = PowerSeries(p * q ** np.arange(n_max))
        inv = lagrange_inverse_coeffs(psi, n_max=n_max)
        n = np.arange(1, n_max + 1)
        np.testing.assert_allclose(inv.phi[1:], (-1.0) ** (n - 1) * q ** (n - 1) / p ** n, rtol=1e-10)
        assert inv.consistent is True
        assert inv.h[1] == 1.0

    def test_point_mass_is_its_own_inverse(self):
        inv = lagrange_inverse_coeffs(PowerSeries([1.0], order=9), n_max=10)
        expected = np.zeros(11)
        expected[1] = 1.0
        np.testing.assert_array_equal(inv.phi, expected)

    def test_sibuya_inverse_is_quadratic(self):
        target = make_target("sibuya", {"alpha": 0.5})
        psi = PowerSeries(target.pmf_vector(10))
        inv = lagrange_inverse_coeffs(psi, n_max=10, cross_check=False)
        expected = np.zeros(11)
        expected[1], expected[2] = 2.0, -1.0
        np.testing.assert_allclose(inv.phi, expected, atol=1e-8)

    def test_h_is_phi_times_pi1_power(self):
        psi = PowerSeries([0.5, 0.3, 0.2], order=7)
        inv = lagrange_inverse_coeffs(psi, n_max=8, max_part=2)
        n = np.arange(inv.h.size)
        np.testing.assert_allclose(inv.h[1:], inv.phi[1:] * 0.5 ** n[1:], rtol=1e-14)

    def test_composition_gives_identity(self):
        p, n_max = 0.6, 30
        psi = PowerSeries(p * (1 - p) ** np.arange(n_max))
        inv = lagrange_inverse_coeffs(psi, n_max=n_max, cross_check=False)
        Phi = PowerSeries(np.concatenate(([0.0], psi.coeffs)), order=n_max)
        total = PowerSeries([0.0], order=n_max)
        power = PowerSeries([1.0], order=n_max)
        for n in range(1, n_max + 1):
            power = fps_mul(power, Phi, n_max)
            total = total + power * inv.phi[n]
        expected = np.zeros(n_max + 1)
        expected[1] = 1.0
        np.testing.assert_allclose(total.coeffs, expected, atol=1e-8)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.4, 1.0), st.lists(st.floats(0.0, 0.3), min_size=5, max_size=5))
    def test_partition_route_agrees_on_six_states(self, head, rest):
        w = np.array([head] + rest)
        pi = w / w.sum()
        inv = lagrange_inverse_coeffs(PowerSeries(pi, order=11), n_max=12, max_part=5)
        assert inv.consistent is True
        assert inv.checked_up_to == 12

    @pytest.mark.parametrize("q", [0.3, 0.5, 0.8])
    def test_cross_checked_geometric_coefficients(self, q):
        p, n_max = 1.0 - q, 26
        psi = PowerSeries(p * q ** np.arange(n_max))
        inv = lagrange_inverse_coeffs(psi, n_max=n_max)
        n = np.arange(1, n_max + 1)
        assert inv.consistent is True
        assert inv.checked_up_to == n_max
        np.testing.assert_allclose(inv.h[1:], (-q) ** (n - 1), rtol=1e-9, atol=1e-12)

    def test_third_coefficient_by_hand(self):
        # h_3 = (1/3)(-3 C_{2,1} + 3*4 C_{2,2}) = 2 r_1^2 - r_2
        inv = lagrange_inverse_coeffs(PowerSeries([1.0, 0.3, 0.2], order=3), n_max=4)
        assert inv.consistent is True
        assert inv.h[3] == pytest.approx(2 * 0.3 ** 2 - 0.2, rel=1e-12)

    def test_zero_constant_term_rejected(self):
        with pytest.raises(ParameterError):
            lagrange_inverse_coeffs(PowerSeries([0.0, 1.0], order=5), n_max=4)

    def test_short_psi_rejected(self):
        with pytest.raises(ParameterError):
            lagrange_inverse_coeffs(PowerSeries([0.5, 0.5]), n_max=10)


class TestEvaluation:
    """Direct summation inside the disk and Pade continuation outside."""

    def test_direct_sum_matches_closed_inverse(self):
        p, q = 0.6, 0.4
        x = 1.0 - q ** 3
        psi = PowerSeries(p * q ** np.arange(200))
        inv = lagrange_inverse_coeffs(psi, n_max=200, x_max=x, cross_check=False)
        result = evaluate_inverse(inv, x)
        assert result.method == "direct"
        assert result.value == pytest.approx(x / (p + q * x), abs=1e-12)

    def test_pade_continues_past_the_radius(self):
        p, q = 0.3, 0.7
        x = 0.9
        psi = PowerSeries(p * q ** np.arange(60))
        inv = lagrange_inverse_coeffs(psi, n_max=60, x_max=x, cross_check=False)
        result = evaluate_inverse(inv, x)
        assert result.method == "pade"
        assert result.value == pytest.approx(x / (p + q * x), abs=1e-12)

    def test_zero_argument(self):
        inv = lagrange_inverse_coeffs(PowerSeries([0.5, 0.5], order=4), n_max=5)
        assert evaluate_inverse(inv, 0.0).value == 0.0


class TestLambertW:
    """Principal branch by Halley iteration."""

    def test_zero(self):
        assert lambert_w(0.0) == 0.0

    def test_e(self):
        assert lambert_w(math.e) == pytest.approx(1.0, rel=1e-14)

    def test_inverse_of_w_exp_w(self):
        assert lambert_w(0.7 * math.exp(0.7)) == pytest.approx(0.7, rel=1e-14)

    def test_scaled_branch(self):
        lam = 0.7
        assert lambert_w_scaled(lam, math.exp(lam)) == pytest.approx(1.0, rel=1e-14)

    def test_negative_input(self):
        with pytest.raises(ParameterError):
            lambert_w(-0.1)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.0, 1e3))
    def test_residual(self, x):
        w = lambert_w(x)
        assert abs(w * math.exp(w) - x) <= 1e-13 * max(1.0, x)

    def test_mid_range_argument(self):
        w = lambert_w(423.0)
        assert w * math.exp(w) == pytest.approx(423.0, rel=1e-14)

    def test_residual_on_fixed_grid(self):
        for x in np.concatenate((np.geomspace(1e-12, 1.0, 50), np.linspace(1.0, 1e3, 2000))):
            w = lambert_w(float(x))
            assert abs(w * math.exp(w) - x) <= 1e-13 * max(1.0, x)

    def test_large_argument(self):
        x = 1e300
        w = lambert_w(x)
        assert w + math.log(w) == pytest.approx(math.log(x), rel=1e-14)
