"""
Tests for the Lamperti transition matrix, stationary vectors, structural
checks and the recurrence classification.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lamperti.chain import (
    build_transition,
    classify,
    expected_max,
    failure_rate,
    foster_drift_threshold,
    gth_solve,
    is_dfr,
    is_stochastically_monotone,
    is_tp2,
    kirchhoff_pi,
    kirchhoff_vector,
    second_eigenvalue,
    stationary_distribution,
    time_reverse,
    truncate_target,
    worst_state_stats,
)
from lamperti.config import CRITICAL_D, E_NEG_GAMMA
from lamperti.design import branching_law, design_branching_finite
from lamperti.errors import ParameterError, ValidationError
from lamperti.laws import DiscreteLaw, make_target


def _two_state(f):
    return build_transition([f, 1.0])


class TestBuildTransition:
    """Power-difference rows and input checks."""

    def test_two_state_entries(self):
        P = _two_state(0.5).P
        np.testing.assert_allclose(P, [[0.5, 0.5], [0.25, 0.75]], rtol=1e-15)

    def test_rows_sum_to_one(self, chain8):
        np.testing.assert_allclose(chain8.P.sum(axis=1), 1.0, atol=1e-12)

    def test_cumulative_rows_are_powers(self, chain6):
        i = np.arange(1, 7)[:, None]
        np.testing.assert_allclose(chain6.Pc, chain6.F[1:][None, :] ** i, rtol=1e-12)

    def test_single_state(self):
        chain = build_transition([1.0])
        np.testing.assert_array_equal(chain.P, [[1.0]])

    def test_tables_are_zero_padded(self, chain6):
        assert chain6.F[0] == 0.0
        assert chain6.tail[0] == 1.0
        assert chain6.F[-1] == 1.0

    def test_last_value_must_be_one(self):
        with pytest.raises(ParameterError, match="F\\(N\\) must equal 1"):
            build_transition([0.3, 0.9])

    def test_must_be_nondecreasing(self):
        with pytest.raises(ParameterError):
            build_transition([0.6, 0.4, 1.0])

    def test_empty(self):
        with pytest.raises(ParameterError):
            build_transition([])


class TestStationary:
    """Stationary vector by solve, GTH, power iteration and Kirchhoff minors."""

    def test_two_state_balance(self):
        f = 0.5
        pi = stationary_distribution(_two_state(f))
        expected = f * f / (f * f + 1 - f)
        np.testing.assert_allclose(pi, [expected, 1 - expected], rtol=1e-12)

    def test_design_reproduces_target(self, chain6):
        target = truncate_target(make_target("geometric", {"p": 0.5}), 6)
        np.testing.assert_allclose(chain6.pi, target, rtol=1e-10)

    @pytest.mark.parametrize("method", ["solve", "gth", "power"])
    def test_methods_agree(self, chain8, method):
        np.testing.assert_allclose(stationary_distribution(chain8, method=method), chain8.pi, atol=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(3, 12).flatmap(lambda n: st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n)))
    def test_finite_round_trip(self, weights):
        pi = np.array(weights) / math.fsum(weights)
        chain = build_transition(design_branching_finite(pi))
        np.testing.assert_allclose(stationary_distribution(chain, method="gth"), pi, rtol=0, atol=1e-9)
        assert is_stochastically_monotone(chain)
        assert is_tp2(chain)

    def test_unknown_method(self, chain6):
        with pytest.raises(ParameterError):
            stationary_distribution(chain6, method="qr")

    def test_single_state(self):
        np.testing.assert_array_equal(stationary_distribution(np.ones((1, 1))), [1.0])

    def test_gth_on_reducible_chain(self):
        with pytest.raises(ValidationError):
            gth_solve(np.eye(3))

    def test_kirchhoff_two_states(self):
        P = _two_state(0.4).P
        assert kirchhoff_pi(P, 1) == pytest.approx(1 - P[1, 1], rel=1e-14)

    def test_kirchhoff_vector_matches_gth(self, chain6):
        np.testing.assert_allclose(kirchhoff_vector(chain6), chain6.pi, rtol=1e-9)

    def test_kirchhoff_size_cap(self, geometric_chain):
        with pytest.raises(ParameterError):
            kirchhoff_pi(geometric_chain(13), 1)

    def test_second_eigenvalue_two_states(self):
        f = 0.5
        assert second_eigenvalue(_two_state(f)) == pytest.approx(f - f * f, rel=1e-12)

    def test_second_eigenvalue_below_one(self, chain8):
        assert 0.0 < second_eigenvalue(chain8) < 1.0


class TestStructure:
    """Monotonicity, total positivity and time reversal."""

    def test_lamperti_chain_is_monotone(self, chain8):
        assert is_stochastically_monotone(chain8)

    def test_flip_chain_is_not_monotone(self):
        assert not is_stochastically_monotone(np.array([[0.0, 1.0], [1.0, 0.0]]))

    def test_lamperti_chain_is_tp2(self, chain8):
        assert is_tp2(chain8)

    def test_tp2_detects_a_bad_minor(self):
        assert not is_tp2(np.array([[0.2, 1.0], [0.8, 1.0]]))

    def test_tp2_with_zero_entries(self):
        assert is_tp2(np.array([[0.0, 0.5, 1.0], [0.0, 0.25, 1.0]]))

    def test_time_reversal(self, chain6):
        R = time_reverse(chain6, chain6.pi)
        np.testing.assert_allclose(R.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(chain6.pi @ R, chain6.pi, atol=1e-12)

    def test_time_reversal_needs_stationary_vector(self, chain6):
        with pytest.raises(ValidationError):
            time_reverse(chain6, np.full(6, 1 / 6))


class TestTruncation:
    """Target vectors on {1..N}."""

    def test_renormalize(self):
        p, q, N = 0.5, 0.5, 5
        k = np.arange(1, N + 1)
        w = truncate_target(make_target("geometric", {"p": p}), N)
        np.testing.assert_allclose(w, p * q ** (k - 1) / (1 - q ** N), rtol=1e-14)

    def test_lump(self):
        q, N = 0.5, 5
        w = truncate_target(make_target("geometric", {"p": 0.5}), N, mode="lump")
        assert w[-1] == pytest.approx(q ** (N - 1), rel=1e-14)
        assert math.fsum(w) == pytest.approx(1.0, rel=1e-15)

    def test_measure_renormalize(self):
        np.testing.assert_allclose(truncate_target(make_target("counting"), 4), 0.25)

    def test_measure_lump_needs_finite_mass(self):
        with pytest.raises(ParameterError, match="infinite mass"):
            truncate_target(make_target("harmonic"), 4, mode="lump")

    def test_mode_checked(self):
        with pytest.raises(ParameterError):
            truncate_target(make_target("geometric", {"p": 0.5}), 4, mode="clip")


class TestFailureRate:
    """Hazard of the target law."""

    def test_geometric_rate_is_constant(self):
        np.testing.assert_allclose(failure_rate(make_target("geometric", {"p": 0.3}), 10), 0.3, rtol=1e-12)

    def test_geometric_is_dfr(self):
        assert is_dfr(make_target("geometric", {"p": 0.3}), 20)

    def test_pareto_is_dfr(self):
        assert is_dfr(make_target("pareto", {"alpha": 1.5}), 50)

    def test_poisson_is_not_dfr(self):
        assert not is_dfr(make_target("poisson-shifted", {"lam": 2.0}), 20)


class TestClassification:
    """Verdicts from the limit of i P(nu > i)."""

    def test_geometric_design_is_positive_recurrent(self):
        result = classify(branching_law("geometric", {"p": 0.5}))
        assert result.verdict == "PositiveRecurrent"
        assert result.limit_estimate == pytest.approx(0.0, abs=1e-9)

    def test_sibuya_design_limit(self):
        result = classify(branching_law("sibuya", {"alpha": 0.5}))
        assert result.verdict == "PositiveRecurrent"
        assert result.limit_estimate == pytest.approx(1 / math.pi, rel=1e-3)

    def test_counting_design_is_transient(self):
        result = classify(branching_law("counting"))
        assert result.verdict == "Transient"
        assert result.limit_estimate == pytest.approx(1.0, rel=1e-2)

    def test_linear_design_is_transient(self):
        result = classify(branching_law("linear"))
        assert result.verdict == "Transient"
        assert result.limit_estimate == pytest.approx(math.sqrt(2.0), rel=1e-2)

    def test_harmonic_design_is_null_recurrent(self):
        result = classify(branching_law("harmonic"))
        assert result.verdict == "NullRecurrent"
        assert result.limit_estimate == pytest.approx(E_NEG_GAMMA, rel=1e-2)
        assert abs(result.d_estimate) < 0.1 * CRITICAL_D

    @pytest.mark.slow
    def test_log_tail_design_is_positive_recurrent(self):
        result = classify(branching_law("log-tail", {"beta": 1.0}))
        assert result.verdict == "PositiveRecurrent"
        assert result.limit_estimate == pytest.approx(E_NEG_GAMMA, rel=2e-2)
        assert result.d_estimate == pytest.approx(-2.0 * CRITICAL_D, rel=0.15)

    @pytest.mark.parametrize("d,verdict", [
        (-2.0 * CRITICAL_D, "PositiveRecurrent"),
        (-CRITICAL_D, "Inconclusive"),
        (0.5 * CRITICAL_D, "NullRecurrent"),
        (CRITICAL_D, "CriticalOpen"),
        (2.0 * CRITICAL_D, "Transient"),
    ])
    def test_second_order_bands(self, d, verdict):
        law = DiscreteLaw(label="critical", tail_fn=lambda j: (E_NEG_GAMMA + d / np.log(j)) / j)
        result = classify(law)
        assert result.verdict == verdict
        assert result.d_estimate == pytest.approx(d, rel=1e-6)

    def test_unbounded_growth_is_transient(self):
        law = DiscreteLaw(label="heavy", tail_fn=lambda j: np.power(j, -0.5))
        result = classify(law)
        assert result.verdict == "Transient"
        assert math.isinf(result.limit_estimate)

    def test_finite_law_rejected(self):
        with pytest.raises(ParameterError):
            classify(DiscreteLaw.from_pmf([0.5, 0.5]))

    def test_to_dict_carries_constants(self):
        data = classify(branching_law("counting")).to_dict()
        assert data["critical_d"] == CRITICAL_D
        assert data["c"] == E_NEG_GAMMA


class TestMaxima:
    """Expected maxima, Foster drift and state-1 statistics."""

    def test_expected_max_of_one_copy(self):
        p, q = 0.5, 0.5
        j = np.arange(1, 200)
        expected = 1.0 + np.sum(p * q ** j / (1 - q ** (j + 1)))
        assert expected_max(branching_law("geometric", {"p": p}), 1) == pytest.approx(expected, rel=1e-10)

    def test_expected_max_grows_with_i(self):
        law = branching_law("geometric", {"p": 0.5})
        assert expected_max(law, 4) > expected_max(law, 2) > expected_max(law, 1)

    def test_sibuya_design_has_infinite_mean(self):
        assert math.isinf(expected_max(branching_law("sibuya", {"alpha": 0.5}), 1))

    def test_expected_max_needs_positive_i(self):
        with pytest.raises(ParameterError):
            expected_max(branching_law("geometric", {"p": 0.5}), 0)

    def test_foster_threshold_for_point_mass(self):
        assert foster_drift_threshold(DiscreteLaw.from_pmf([1.0], lower=1)) == 2

    def test_foster_threshold_for_geometric_design(self):
        threshold = foster_drift_threshold(branching_law("geometric", {"p": 0.5}))
        assert threshold is not None and threshold <= 10

    @pytest.mark.slow
    def test_no_threshold_for_transient_design(self):
        assert foster_drift_threshold(branching_law("counting")) is None

    def test_worst_state_two_states(self):
        f = 0.5
        chain = _two_state(f)
        pi = stationary_distribution(chain)
        stats = worst_state_stats(chain, pi)
        assert stats.mean_return == pytest.approx(3.0, rel=1e-12)
        assert stats.mean_positive_excursion == pytest.approx(5.0, rel=1e-12)
        assert stats.occupation_rho == pytest.approx(1 / 6, rel=1e-12)
