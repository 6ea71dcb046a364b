"""
Tests for the seeded Monte Carlo engine. Statistical checks compare against
matrix oracles with fixed seeds.
"""

import numpy as np
import pytest

from lamperti.chain import build_transition, stationary_distribution, truncate_target
from lamperti.design import branching_law, design_branching_finite
from lamperti.errors import ParameterError, ValidationError
from lamperti.hitting import hitting_tail_sequence
from lamperti.laws import make_target
from lamperti.montecarlo import (
    LawSampler,
    SimConfig,
    TableSampler,
    empirical_hitting,
    empirical_transition_counts,
    ks_against_tail,
    make_sampler,
    ratio_occupation,
    replica_generator,
    simulate,
    simulate_path,
)


def _geometric_table(N):
    return design_branching_finite(truncate_target(make_target("geometric", {"p": 0.5}), N))


class TestSimConfig:
    """Run parameters are checked on construction."""

    def test_steps_must_exceed_burn_in(self):
        with pytest.raises(ParameterError):
            SimConfig(steps=100, burn_in=100)

    def test_replicas_positive(self):
        with pytest.raises(ParameterError):
            SimConfig(replicas=0)

    def test_seed_range(self):
        with pytest.raises(ParameterError):
            SimConfig(seed=-1)


class TestSamplers:
    """Inverse search on tails."""

    def test_table_sampler_picks_first_small_tail(self):
        sampler = TableSampler([0.6, 0.2, 0.0])
        assert sampler.next_state(0.7) == 1
        assert sampler.next_state(0.6) == 1
        assert sampler.next_state(0.5) == 2
        assert sampler.next_state(0.1) == 3

    def test_law_sampler_head_and_deep_tail(self):
        law = branching_law("counting")
        sampler = LawSampler(law)
        for w in (0.5, 0.01, 1e-6):
            j = sampler.next_state(w)
            assert law.tail(float(j)) <= w < law.tail(float(j - 1))

    def test_make_sampler_dispatch(self):
        table = _geometric_table(4)
        assert isinstance(make_sampler(table), TableSampler)
        assert isinstance(make_sampler(build_transition(table)), TableSampler)
        assert isinstance(make_sampler(branching_law("geometric", {"p": 0.5})), LawSampler)
        assert make_sampler([0.5, 1.0]).N == 2

    def test_bad_cdf_table(self):
        with pytest.raises(ParameterError):
            make_sampler([0.5, 0.4])


class TestPaths:
    """Reproducibility and trivial chains."""

    def test_single_state_chain_stays_put(self):
        path = simulate_path([1.0], SimConfig(seed=3, steps=500, burn_in=0))
        assert path.size == 501
        assert np.all(path == 1)

    def test_same_seed_same_path(self):
        cfg = SimConfig(seed=11, steps=2000, burn_in=0)
        table = _geometric_table(6)
        np.testing.assert_array_equal(simulate_path(table, cfg), simulate_path(table, cfg))

    def test_replicas_use_distinct_streams(self):
        cfg = SimConfig(seed=11, steps=2000, burn_in=0)
        table = _geometric_table(6)
        assert not np.array_equal(simulate_path(table, cfg, replica=0), simulate_path(table, cfg, replica=1))

    def test_generator_is_philox(self):
        assert isinstance(replica_generator(1, 0).bit_generator, np.random.Philox)

    def test_initial_distribution(self):
        cfg = SimConfig(seed=5, steps=10, burn_in=0, x0=[0.0, 0.0, 1.0])
        assert simulate_path(_geometric_table(3), cfg)[0] == 3

    def test_countable_law_path(self):
        path = simulate_path(branching_law("geometric", {"p": 0.5}), SimConfig(seed=2, steps=5000, burn_in=0))
        assert path.min() >= 1
        assert path.size == 5001


class TestTransitionCounts:
    """One-step counts from a path."""

    def test_small_path(self):
        counts, freq = empirical_transition_counts([1, 2, 1, 1], 2)
        np.testing.assert_array_equal(counts, [[1, 1], [1, 0]])
        np.testing.assert_array_equal(freq, [[0.5, 0.5], [1.0, 0.0]])

    def test_unvisited_row_is_nan(self):
        _, freq = empirical_transition_counts([1, 1, 1], 2)
        assert np.all(np.isnan(freq[1]))

    def test_path_outside_space(self):
        with pytest.raises(ParameterError):
            empirical_transition_counts([1, 3], 2)


@pytest.mark.statistical
class TestAgainstMatrix:
    """Seeded simulations checked against exact matrix quantities."""

    @pytest.mark.slow
    def test_occupation_on_eight_states(self):
        table = _geometric_table(8)
        chain = build_transition(table)
        pi = stationary_distribution(chain)
        summary = simulate(table, SimConfig(seed=20240601, steps=1_000_000, burn_in=1_000))
        assert np.all(np.abs(summary.occupation - pi) <= 4 * summary.occupation_stderr)
        assert summary.diverged == 0
        assert summary.samples == 999_001

    def test_two_state_excursions(self):
        table = _geometric_table(2)
        chain = build_transition(table)
        pi = stationary_distribution(chain)
        summary = simulate(table, SimConfig(seed=7, steps=100_000, burn_in=1_000))
        exc = summary.excursion
        assert abs(exc.fraction_state1_from_above - chain.F[1] * pi[0]) <= 3 * exc.fraction_stderr
        assert abs(exc.mean_return_time - 1.0 / pi[0]) <= 4.5 * exc.return_time_stderr

    def test_transition_frequencies(self):
        table = _geometric_table(4)
        chain = build_transition(table)
        path = simulate_path(table, SimConfig(seed=99, steps=200_000, burn_in=0))
        counts, freq = empirical_transition_counts(path, 4)
        n = counts.sum(axis=1, keepdims=True)
        se = np.sqrt(chain.P * (1 - chain.P) / n)
        assert np.all(np.abs(freq - chain.P) <= 4 * se + 1e-12)

    def test_hitting_times_follow_matrix_law(self, chain8, delta1):
        cfg = SimConfig(seed=31, steps=20_000, burn_in=0, replicas=2_000)
        sample = empirical_hitting(_geometric_table(8), cfg, target=8)
        assert not sample.censored.any()
        tail = hitting_tail_sequence(chain8, delta1(8), int(sample.times.max()))
        result = ks_against_tail(sample.observed, tail, level=0.01)
        assert result.passed

    def test_occupation_ratio(self, chain6):
        cfg = SimConfig(seed=4, steps=200_000, burn_in=1_000)
        result = ratio_occupation(_geometric_table(6), cfg, 1, 2)
        assert result.ratio == pytest.approx(chain6.pi[0] / chain6.pi[1], rel=0.1)
        assert not result.low_confidence


class TestSummaries:
    """Summary objects and edge cases."""

    def test_frame_and_scalars(self):
        summary = simulate(_geometric_table(4), SimConfig(seed=1, steps=5_000, burn_in=100, replicas=2))
        frame = summary.to_frame()
        assert list(frame.columns) == ["state", "occupation", "stderr"]
        assert len(frame) == 4
        assert frame["occupation"].sum() == pytest.approx(1.0)
        assert summary.scalars()["replicas"] == 2

    def test_countable_width(self):
        summary = simulate(branching_law("geometric", {"p": 0.5}), SimConfig(seed=1, steps=5_000, burn_in=100),
                           states=5)
        assert summary.occupation.size == 5

    def test_ratio_of_state_with_itself(self):
        result = ratio_occupation(_geometric_table(3), SimConfig(seed=1, steps=2_000, burn_in=0), 1, 1)
        assert result.ratio == 1.0

    def test_ratio_needs_visits(self):
        with pytest.raises(ValidationError, match="never visited"):
            ratio_occupation([1.0], SimConfig(seed=1, steps=100, burn_in=0), 1, 2)

    def test_unreachable_target_is_censored(self):
        sample = empirical_hitting([1.0], SimConfig(seed=1, steps=5, burn_in=0, replicas=3), target=2)
        assert sample.censored.all()
        assert sample.observed.size == 0

    def test_target_checked(self):
        with pytest.raises(ParameterError):
            empirical_hitting([1.0], SimConfig(seed=1, steps=5, burn_in=0), target=0)


class TestKolmogorovSmirnov:
    """Lattice KS statistic."""

    def test_exact_match(self):
        result = ks_against_tail([0, 0, 0], [0.0, 0.0])
        assert result.statistic == 0.0
        assert result.passed

    def test_callable_tail(self):
        sample = np.array([1, 1, 2, 2])
        result = ks_against_tail(sample, lambda n: np.where(n < 1, 1.0, np.where(n < 2, 0.5, 0.0)))
        assert result.statistic == pytest.approx(0.0)

    def test_detects_wrong_law(self):
        result = ks_against_tail(np.full(500, 5), lambda n: np.where(n < 1, 1.0, 0.0))
        assert not result.passed

    def test_empty_sample(self):
        with pytest.raises(ParameterError):
            ks_against_tail([], [0.0])

    def test_negative_times(self):
        with pytest.raises(ParameterError):
            ks_against_tail([-1, 2], [0.0])
