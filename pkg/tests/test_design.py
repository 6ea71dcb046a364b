"""
Tests for the inverse design: bisection, series and closed-form routes.
"""

import math

import numpy as np
import pytest
from scipy import special

from lamperti.design import (
    binomial_shifted_h,
    branching_law,
    closed_form_design,
    design_branching,
    design_branching_finite,
    design_from_measure,
    geometric_generation_tail,
    invert_pgf_bisection,
    log_tail_branching,
    shifted_negative_binomial_h,
    solve_branching_tails,
)
from lamperti.errors import ParameterError
from lamperti.laws import DiscreteLaw, make_target
from lamperti.series import PowerSeries, lagrange_inverse_coeffs

CLOSED_FAMILIES = [
    ("geometric", {"p": 0.3}),
    ("negative-binomial", {"alpha": 2.0, "p": 0.4}),
    ("fisher", {"p": 0.5}),
    ("sibuya", {"alpha": 0.5}),
    ("poisson-positive", {"lam": 0.8}),
    ("poisson-shifted", {"lam": 1.2}),
    ("binomial-restricted", {"p": 0.3, "size": 6}),
    ("counting", {}),
    ("linear", {}),
    ("harmonic", {}),
]


class TestBisection:
    """Monotone pgf inversion."""

    def test_square(self):
        assert invert_pgf_bisection(lambda x: x * x, 0.25) == pytest.approx(0.5, abs=1e-14)

    def test_zero(self):
        assert invert_pgf_bisection(lambda x: x * x, 0.0) == 0.0

    def test_out_of_range(self):
        with pytest.raises(ParameterError):
            invert_pgf_bisection(lambda x: 0.5 * x, 0.8)

    def test_tails_in_both_regimes(self):
        target = make_target("geometric", {"p": 0.5})
        j = np.array([1.0, 2.0, 30.0])
        t = solve_branching_tails(target, target.tail(j))
        np.testing.assert_allclose(t, 0.5 * 0.5 ** j / (1.0 - 0.5 ** (j + 1)), rtol=1e-12)

    def test_deep_tail_keeps_relative_accuracy(self):
        table = design_branching(make_target("geometric", {"p": 0.5}), 60)
        q = 0.5
        j = table.j.astype(float)
        np.testing.assert_allclose(table.tail, (1 - q) * q ** j / (1 - q ** (j + 1)), rtol=1e-10)


class TestClosedForms:
    """Explicit designs and their agreement with the numerical route."""

    def test_geometric(self):
        table = closed_form_design("geometric", {"p": 0.5}, 5)
        j = np.arange(1, 6)
        np.testing.assert_allclose(table.F, (1 - 0.5 ** j) / (1 - 0.5 ** (j + 1)), rtol=1e-14)

    def test_sibuya_first_value(self):
        assert closed_form_design("sibuya", {"alpha": 0.5}, 1).F[0] == pytest.approx(0.75, rel=1e-12)

    @pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
    def test_sibuya_matches_power_of_target_tail(self, alpha):
        table = design_branching(make_target("sibuya", {"alpha": alpha}), 1000)
        j = np.arange(1, 1001, dtype=float)
        target_tail = np.exp(special.gammaln(j + 1 - alpha) - special.gammaln(1 - alpha) - special.gammaln(j + 1))
        np.testing.assert_allclose(table.F, 1 - target_tail ** (1 / alpha), rtol=0, atol=1e-10)

    def test_counting(self):
        table = closed_form_design("counting-design", None, 4)
        np.testing.assert_allclose(table.F, [0.5, 2 / 3, 0.75, 0.8])

    def test_linear(self):
        j = np.arange(1, 6, dtype=float)
        s = np.sqrt(1 + 2 * j * (j + 1))
        np.testing.assert_allclose(closed_form_design("linear", {}, 5).F, (s - 1) / (s + 1), rtol=1e-14)

    def test_harmonic(self):
        h = np.cumsum(1.0 / np.arange(1, 6))
        np.testing.assert_allclose(closed_form_design("harmonic", {}, 5).F, 1 - np.exp(-h), rtol=1e-12)

    def test_poisson_positive(self):
        lam = 0.8
        table = closed_form_design("poisson-positive", {"lam": lam}, 6)
        expected = np.log1p(table.F_inf * math.expm1(lam)) / lam
        np.testing.assert_allclose(table.F, expected, rtol=1e-12)

    def test_poisson_shifted_approaches_one(self):
        table = closed_form_design("poisson-shifted", {"lam": 1.0}, 30)
        assert np.all(np.diff(table.F) >= -1e-15)
        assert table.F[-1] == pytest.approx(1.0, abs=1e-12)

    def test_binomial_restricted_formula(self):
        p, n = 0.3, 4
        q = 1 - p
        table = closed_form_design("binomial-restricted", {"p": p, "size": n}, 10)
        assert table.N == n
        for j, F in zip(table.j, table.F):
            partial = sum(math.comb(n, k) * (p / q) ** k for k in range(1, j + 1))
            assert F == pytest.approx((q / p) * ((1 + partial) ** (1 / n) - 1), rel=1e-12)

    def test_unknown_family(self):
        with pytest.raises(ParameterError, match="no closed-form design"):
            closed_form_design("pareto", {"alpha": 1.5}, 5)

    @pytest.mark.parametrize("name,params", CLOSED_FAMILIES)
    def test_bisection_reproduces_closed_form(self, name, params):
        closed = closed_form_design(name, params, 15)
        numeric = design_branching(make_target(name, params), 15)
        np.testing.assert_allclose(numeric.F, closed.F, rtol=0, atol=1e-10)

    @pytest.mark.parametrize("name,params", CLOSED_FAMILIES)
    def test_design_dominates_target(self, name, params):
        table = closed_form_design(name, params, 15)
        if name in ("counting", "linear", "harmonic"):
            assert np.all(np.diff(table.F) > 0)
        else:
            assert np.all(table.F >= table.F_inf - 1e-14)


class TestSeriesRoute:
    """Lagrange series and its Pade continuation as an independent design."""

    @pytest.mark.parametrize("q", [0.3, 0.5, 0.8])
    def test_geometric_by_series(self, q):
        table = design_branching(make_target("geometric", {"p": 1.0 - q}), 50, method="series")
        j = np.arange(1, 51, dtype=float)
        np.testing.assert_allclose(table.F, (1 - q ** j) / (1 - q ** (j + 1)), rtol=0, atol=1e-10)

    def test_counting_by_series(self):
        table = design_branching(make_target("counting"), 10, method="series")
        j = np.arange(1, 11)
        np.testing.assert_allclose(table.F, j / (1 + j), atol=1e-10)

    def test_both_routes_agree(self):
        table = design_branching(make_target("geometric", {"p": 0.5}), 20, method="both")
        assert table.discrepancy <= 1e-9
        assert table.series_method[0] == "direct"
        frame = table.to_frame()
        assert list(frame.columns) == ["j", "F", "tail", "F_inf", "F_series", "series_method", "abs_discrepancy"]

    def test_shifted_negative_binomial_coefficients(self):
        alpha, p = 1.5, 0.6
        target = make_target("shifted-negative-binomial", {"alpha": alpha, "p": p})
        inv = lagrange_inverse_coeffs(PowerSeries(target.pmf_vector(12)), n_max=12)
        np.testing.assert_allclose(inv.h[1:], shifted_negative_binomial_h(alpha, 1 - p, 12)[1:], rtol=1e-9)

    def test_binomial_shifted_coefficients(self):
        p, size = 0.3, 5
        target = make_target("binomial-shifted", {"p": p, "size": size})
        psi = PowerSeries(target.pmf_vector(size), order=9)
        inv = lagrange_inverse_coeffs(psi, n_max=10, max_part=size - 1)
        np.testing.assert_allclose(inv.h[1:], binomial_shifted_h(p, size, 10)[1:], rtol=1e-9)


class TestFiniteDesign:
    """Designs for targets on {1, ..., N}."""

    def test_ends_at_one(self):
        table = design_branching_finite([0.5, 0.3, 0.2])
        assert table.F[-1] == 1.0
        assert table.tail[-1] == 0.0
        assert np.all(np.diff(table.F) > 0)

    def test_single_state(self):
        table = design_branching_finite([1.0])
        np.testing.assert_array_equal(table.F, [1.0])

    def test_two_states(self):
        # F(1) solves pi1 F + pi2 F^2 = pi1
        pi1, pi2 = 0.4, 0.6
        F1 = design_branching_finite([pi1, pi2]).F[0]
        assert pi1 * F1 + pi2 * F1 ** 2 == pytest.approx(pi1, abs=1e-13)

    def test_finite_target_goes_through_finite_route(self):
        table = design_branching(make_target("binomial-shifted", {"p": 0.5, "size": 4}), 10)
        assert table.N == 4
        assert table.F[-1] == 1.0

    def test_slice_when_j_max_is_short(self):
        table = design_branching(make_target("binomial-shifted", {"p": 0.5, "size": 6}), 3)
        assert table.N == 3

    def test_sum_checked(self):
        with pytest.raises(ParameterError, match="sum to 1"):
            design_branching_finite([0.5, 0.4])

    def test_first_mass_positive(self):
        with pytest.raises(ParameterError):
            design_branching_finite([0.0, 1.0])


class TestValidation:
    """Argument checks on the design entry points."""

    def test_unknown_method(self):
        with pytest.raises(ParameterError, match="method"):
            design_branching(make_target("geometric", {"p": 0.5}), 5, method="newton")

    def test_support_must_start_at_one(self):
        with pytest.raises(ParameterError):
            design_branching(DiscreteLaw.from_pmf([0.5, 0.5], lower=0), 5)

    def test_j_max_positive(self):
        with pytest.raises(ParameterError):
            design_branching(make_target("geometric", {"p": 0.5}), 0)


class TestBranchingLaw:
    """Designed nu as a DiscreteLaw."""

    def test_geometric_matches_closed_form(self):
        law = branching_law("geometric", {"p": 0.5})
        assert law.label == "geometric-design"
        j = np.arange(1, 6, dtype=float)
        np.testing.assert_allclose(law.tail(j), closed_form_design("geometric", {"p": 0.5}, 5).tail, rtol=1e-14)

    def test_numerical_family_is_dominated(self):
        law = branching_law("pareto", {"alpha": 1.5})
        target = make_target("pareto", {"alpha": 1.5})
        j = np.arange(1, 8, dtype=float)
        assert np.all(law.tail(j) <= target.tail(j) + 1e-14)

    def test_generation_tail_telescopes(self):
        q = 0.5
        for i in range(1, 6):
            assert geometric_generation_tail(q, i) == pytest.approx((1 - q) * q ** i / (1 - q ** (i + 1)), rel=1e-13)

    def test_generation_tail_range(self):
        with pytest.raises(ParameterError):
            geometric_generation_tail(1.0, 3)


class TestMeasureDesign:
    """Designs for invariant measures of infinite mass."""

    def test_counting_measure(self):
        table = design_from_measure(make_target("counting"), 12)
        j = np.arange(1, 13)
        np.testing.assert_allclose(table.tail, 1.0 / (1.0 + j), rtol=1e-10)

    def test_harmonic_measure(self):
        table = design_from_measure(make_target("harmonic"), 12)
        h = np.cumsum(1.0 / np.arange(1, 13))
        np.testing.assert_allclose(table.tail, np.exp(-h), rtol=1e-9)

    def test_method_checked(self):
        with pytest.raises(ParameterError):
            design_from_measure(make_target("counting"), 5, method="newton")


class TestLogTailDesign:
    """Root finding for the law without moments."""

    def test_tail_is_dominated_and_decreasing(self):
        law = log_tail_branching(1.0)
        target = make_target("log-tail", {"beta": 1.0})
        j = np.array([1.0, 10.0, 100.0])
        tails = law.tail(j)
        assert np.all(np.diff(tails) < 0)
        assert np.all(tails <= target.tail(j) * (1 + 1e-9))

    def test_deep_tail_stays_finite(self):
        law = log_tail_branching(1.0)
        target = make_target("log-tail", {"beta": 1.0})
        j = np.array([2.0 ** 20, 2.0 ** 40])
        tails = law.tail(j)
        assert np.all(np.isfinite(tails)) and np.all(tails > 0)
        assert np.all(tails <= target.tail(j) * (1 + 1e-9))

    def test_beta_positive(self):
        with pytest.raises(ParameterError):
            log_tail_branching(0.0)
