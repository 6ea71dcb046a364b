"""
montecarlo.py
=============
Seedable simulation of the Lamperti recursion X_{n+1} = F^-1(U^(1/X_n)).

U^(1/x) is formed as exp(log(U)/x), and the next state is the first j with
P(nu > j) <= 1 - U^(1/x) = -expm1(log(U)/x), so the search works on tails and
stays accurate when x is huge. Finite chains search their tail table with
searchsorted; countable laws look up a cached head table first and then
double and bisect through the closed-form tail.

Replica r draws from Philox seeded by SeedSequence(seed, spawn_key=(r,)).
Statistics carry batch-means standard errors over 50 batches per replica.

Usage:
  from lamperti.montecarlo import SimConfig, simulate
  summary = simulate(table, SimConfig(seed=1, steps=100_000, burn_in=1_000))
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from lamperti.chain import TransitionMatrix
from lamperti.config import BATCH_COUNT, LOG_UNDERFLOW, MIN_VISITS, STATE_CAP
from lamperti.design import DesignTable
from lamperti.errors import ParameterError, ValidationError
from lamperti.laws import DiscreteLaw

logger = logging.getLogger(__name__)

HEAD_TABLE = 4096
UNIFORM_BLOCK = 4096
COUNTABLE_WIDTH = 1000


@dataclass(frozen=True)
class SimConfig:
    seed: int = 20240601
    steps: int = 100_000
    burn_in: int = 1_000
    replicas: int = 1
    x0: Union[int, Sequence[float]] = 1

    def __post_init__(self):
        if not self.steps > self.burn_in >= 0:
            raise ParameterError(f"need steps > burn_in >= 0, got steps={self.steps}, burn_in={self.burn_in}")
        if self.replicas < 1:
            raise ParameterError(f"replicas must be >= 1, got {self.replicas}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ParameterError("seed must be a 64-bit unsigned integer")


def replica_generator(seed: int, replica: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(replica),))))


# ──────────────────────────────────────────────
# Samplers
# ──────────────────────────────────────────────
class TableSampler:
    """Inverse search over a finite tail table tail[k] = P(nu > k + 1), tail[N-1] = 0."""

    def __init__(self, tail: Sequence[float]):
        t = np.asarray(tail, dtype=float)
        self.N = t.size
        self._ascending = t[::-1].copy()
        self._ascending[0] = 0.0

    def next_state(self, w: float) -> int:
        return self.N - int(np.searchsorted(self._ascending, w, side="right")) + 1


class LawSampler:
    """Inverse search for a countable branching law given by its tail."""

    def __init__(self, law: DiscreteLaw, cap: int = STATE_CAP):
        self.law = law
        self.cap = cap
        self.N = None
        self._head = TableSampler(np.append(np.atleast_1d(law.tail(np.arange(1, HEAD_TABLE + 1, dtype=float))),
                                            0.0))
        self._head_floor = float(law.tail(float(HEAD_TABLE)))

    def next_state(self, w: float) -> int:
        if w >= self._head_floor:
            return self._head.next_state(w)
        lo, hi = HEAD_TABLE, 2 * HEAD_TABLE
        while self.law.tail(float(hi)) > w:
            lo, hi = hi, 2 * hi
            if lo > self.cap:
                return self.cap + 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.law.tail(float(mid)) > w:
                lo = mid
            else:
                hi = mid
        return hi


Sampler = Union[TableSampler, LawSampler]


def make_sampler(F: Union[DesignTable, TransitionMatrix, DiscreteLaw, Sequence[float]]) -> Sampler:
    """Sampler for a design table, built chain, countable law or cdf table F(1..N)."""
    if isinstance(F, DesignTable):
        return TableSampler(F.tail)
    if isinstance(F, TransitionMatrix):
        return TableSampler(F.tail[1:])
    if isinstance(F, DiscreteLaw):
        if F.is_finite:
            return TableSampler(np.atleast_1d(F.tail(np.arange(1, F.N + 1, dtype=float))))
        return LawSampler(F)
    cdf = np.asarray(F, dtype=float)
    if cdf.ndim != 1 or abs(cdf[-1] - 1.0) > 1e-10 or np.any(np.diff(cdf) < 0):
        raise ParameterError("cdf table must be nondecreasing and end at 1")
    return TableSampler(1.0 - cdf)


def _initial_state(x0, rng: np.random.Generator) -> int:
    if np.ndim(x0) == 0:
        state = int(x0)
        if state < 1:
            raise ParameterError(f"initial state must be >= 1, got {state}")
        return state
    weights = np.asarray(x0, dtype=float)
    return int(np.searchsorted(np.cumsum(weights), rng.random() * weights.sum(), side="right")) + 1


def _step(sampler: Sampler, x: int, u: float) -> int:
    if u <= 0.0:
        return 1
    exponent = math.log(u) / x
    if exponent < LOG_UNDERFLOW:
        return 1
    return sampler.next_state(-math.expm1(exponent))


def _run(sampler: Sampler, cfg: SimConfig, replica: int, stop_at: Optional[int] = None
         ) -> Tuple[np.ndarray, bool]:
    """Path X_0..X_steps, cut short on divergence or on the first n >= 1 with X_n = stop_at."""
    rng = replica_generator(cfg.seed, replica)
    x = _initial_state(cfg.x0, rng)
    path = np.empty(cfg.steps + 1, dtype=np.int64)
    path[0] = x
    n = 0
    while n < cfg.steps:
        for u in rng.random(min(UNIFORM_BLOCK, cfg.steps - n)):
            x = _step(sampler, x, float(u))
            n += 1
            if x > STATE_CAP:
                logger.warning("replica %d diverged past state %d at step %d", replica, STATE_CAP, n)
                return path[:n], True
            path[n] = x
            if stop_at is not None and x == stop_at:
                return path[: n + 1], False
    return path, False


def simulate_path(F, cfg: SimConfig, replica: int = 0) -> np.ndarray:
    """States X_0..X_steps of one replica (shorter if the state cap was breached)."""
    path, _ = _run(make_sampler(F), cfg, replica)
    return path


# ──────────────────────────────────────────────
# Summaries
# ──────────────────────────────────────────────
def _batch_stderr(series: np.ndarray, batches: int = BATCH_COUNT) -> Tuple[float, np.ndarray]:
    """Mean and batch-means standard error of the rows of `series` (time along axis 0)."""
    usable = (series.shape[0] // batches) * batches
    if usable == 0:
        return series.mean(axis=0), np.full(series.shape[1:], np.nan)
    means = series[:usable].reshape(batches, -1, *series.shape[1:]).mean(axis=1)
    return series.mean(axis=0), means.std(axis=0, ddof=1) / math.sqrt(batches)


def _occupation_batches(states: np.ndarray, width: int, batches: int = BATCH_COUNT
                        ) -> Tuple[np.ndarray, np.ndarray]:
    """Visit frequencies of 1..width and their batch-means standard errors."""
    overall = np.bincount(states - 1, minlength=width)[:width] / states.size
    if states.size < 2 * batches:
        return overall, np.full(width, np.nan)
    fractions = np.array([np.bincount(chunk - 1, minlength=width)[:width] / chunk.size
                          for chunk in np.array_split(states, batches)])
    return overall, fractions.std(axis=0, ddof=1) / math.sqrt(batches)


@dataclass(frozen=True)
class ExcursionStats:
    fraction_state1_from_above: float
    fraction_stderr: float
    mean_return_time: float
    return_time_stderr: float


@dataclass(frozen=True)
class SimSummary:
    occupation: np.ndarray
    occupation_stderr: np.ndarray
    mean_state: float
    mean_state_stderr: float
    excursion: ExcursionStats
    replicas: int
    diverged: int
    samples: int
    hit_times: Optional[np.ndarray] = field(default=None, repr=False)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"state": np.arange(1, self.occupation.size + 1),
                             "occupation": self.occupation, "stderr": self.occupation_stderr})

    def scalars(self) -> dict:
        return {
            "mean_state": self.mean_state,
            "mean_state_stderr": self.mean_state_stderr,
            "fraction_state1_from_above": self.excursion.fraction_state1_from_above,
            "fraction_stderr": self.excursion.fraction_stderr,
            "mean_return_time": self.excursion.mean_return_time,
            "return_time_stderr": self.excursion.return_time_stderr,
            "replicas": self.replicas,
            "diverged": self.diverged,
            "samples": self.samples,
        }


def _return_times(path: np.ndarray) -> np.ndarray:
    return np.diff(np.flatnonzero(path == 1))


def simulate(F, cfg: SimConfig, states: Optional[int] = None) -> SimSummary:
    """Occupation frequencies, mean state and worst-state statistics over all replicas.

    For countable laws the last occupation entry collects every state >= width.
    """
    sampler = make_sampler(F)
    width = states or sampler.N
    kept, pairs, returns = [], [], []
    diverged = 0
    for r in range(cfg.replicas):
        path, broke = _run(sampler, cfg, r)
        diverged += int(broke)
        tail = path[cfg.burn_in:]
        if tail.size < 2:
            continue
        kept.append(tail)
        pairs.append(((tail[:-1] == 1) & (tail[1:] == 1)).astype(float))
        returns.append(_return_times(tail).astype(float))
    if not kept:
        raise ValidationError("every replica diverged before the end of burn-in")

    width = width or min(int(max(p.max() for p in kept)), COUNTABLE_WIDTH)
    occ_rows, means = [], []
    for tail in kept:
        occ_rows.append(_occupation_batches(np.minimum(tail, width), width) + (tail.size,))
        mu, se = _batch_stderr(tail.astype(float)[:, None])
        means.append((mu[0], se[0], tail.size))

    total = float(sum(n for _, _, n in occ_rows))
    occupation = sum(m * n for m, _, n in occ_rows) / total
    occupation_stderr = np.sqrt(sum((e * n) ** 2 for _, e, n in occ_rows)) / total
    mean_state = sum(mu * n for mu, _, n in means) / total
    mean_state_stderr = math.sqrt(sum((se * n) ** 2 for _, se, n in means)) / total

    pair_series = np.concatenate(pairs)
    frac, frac_err = _batch_stderr(pair_series[:, None])
    gaps = np.concatenate(returns) if returns else np.zeros(0)
    if gaps.size >= 2:
        ret, ret_err = _batch_stderr(gaps[:, None], batches=min(BATCH_COUNT, gaps.size))
        excursion = ExcursionStats(float(frac[0]), float(frac_err[0]), float(ret[0]), float(ret_err[0]))
    else:
        excursion = ExcursionStats(float(frac[0]), float(frac_err[0]), math.nan, math.nan)
    logger.info("simulated %d replicas x %d steps, %d diverged", cfg.replicas, cfg.steps, diverged)
    return SimSummary(occupation=occupation, occupation_stderr=occupation_stderr, mean_state=float(mean_state),
                      mean_state_stderr=float(mean_state_stderr), excursion=excursion, replicas=cfg.replicas,
                      diverged=diverged, samples=int(total))


# ──────────────────────────────────────────────
# Hitting times, ratios, transition counts
# ──────────────────────────────────────────────
@dataclass(frozen=True)
class HittingSample:
    times: np.ndarray
    censored: np.ndarray

    @property
    def observed(self) -> np.ndarray:
        return self.times[~self.censored]


def empirical_hitting(F, cfg: SimConfig, target: int) -> HittingSample:
    """First n >= 1 with X_n = target, one draw per replica; censored at cfg.steps."""
    if target < 1:
        raise ParameterError(f"target state must be >= 1, got {target}")
    sampler = make_sampler(F)
    times = np.empty(cfg.replicas, dtype=np.int64)
    censored = np.zeros(cfg.replicas, dtype=bool)
    for r in range(cfg.replicas):
        path, broke = _run(sampler, cfg, r, stop_at=target)
        hit = path.size > 1 and path[-1] == target and not broke
        times[r] = path.size - 1
        censored[r] = not hit
    if censored.any():
        logger.warning("%d of %d hitting samples censored at %d steps", int(censored.sum()), cfg.replicas, cfg.steps)
    return HittingSample(times=times, censored=censored)


@dataclass(frozen=True)
class OccupationRatio:
    ratio: float
    visits_i: int
    visits_j: int
    low_confidence: bool


def ratio_occupation(F, cfg: SimConfig, i: int, j: int) -> OccupationRatio:
    """Visits to i over visits to j after burn-in, summed over replicas."""
    sampler = make_sampler(F)
    count_i = count_j = 0
    for r in range(cfg.replicas):
        tail = _run(sampler, cfg, r)[0][cfg.burn_in:]
        count_i += int(np.count_nonzero(tail == i))
        count_j += int(np.count_nonzero(tail == j))
    if count_j == 0:
        raise ValidationError(f"state {j} was never visited")
    low = min(count_i, count_j) < MIN_VISITS
    if low:
        logger.warning("occupation ratio %d/%d rests on fewer than %d visits", i, j, MIN_VISITS)
    return OccupationRatio(ratio=1.0 if i == j else count_i / count_j, visits_i=count_i, visits_j=count_j,
                           low_confidence=low)


def empirical_transition_counts(path: Sequence[int], N: int) -> Tuple[np.ndarray, np.ndarray]:
    """One-step counts and row frequencies on {1..N}; unvisited rows are nan."""
    x = np.asarray(path, dtype=np.int64)
    if x.size and (x.min() < 1 or x.max() > N):
        raise ParameterError(f"path leaves the state space 1..{N}")
    counts = np.zeros((N, N))
    np.add.at(counts, (x[:-1] - 1, x[1:] - 1), 1.0)
    rows = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        freq = np.where(rows > 0, counts / rows, np.nan)
    return counts, freq


@dataclass(frozen=True)
class KSResult:
    statistic: float
    critical_value: float
    pvalue: float

    @property
    def passed(self) -> bool:
        return self.statistic <= self.critical_value


def ks_against_tail(sample: Sequence[int], tail: Union[Sequence[float], Callable[[np.ndarray], np.ndarray]],
                    level: float = 0.01) -> KSResult:
    """KS distance between a sample of integer times and the law with P(tau > n) = tail[n].

    Both cdfs jump only at integers, so the sup distance is the maximum over
    n = 0..max(sample); critical value and p-value come from the continuous
    two-sided law, which is conservative for lattice data.
    """
    x = np.asarray(sample, dtype=float)
    if x.size == 0:
        raise ParameterError("empty sample")
    if np.any(x < 0) or np.any(x != np.floor(x)):
        raise ParameterError("sample must hold nonnegative integer times")
    if callable(tail):
        tail_fn = tail
    else:
        table = np.asarray(tail, dtype=float)
        tail_fn = lambda n: table[np.minimum(n, table.size - 1)]

    grid = np.arange(0, int(x.max()) + 1)
    empirical = np.searchsorted(np.sort(x), grid, side="right") / x.size
    model = 1.0 - np.asarray(tail_fn(grid), dtype=float)
    statistic = float(np.max(np.abs(empirical - model)))
    critical = float(stats.kstwo.ppf(1.0 - level, x.size))
    return KSResult(statistic=statistic, critical_value=critical, pvalue=float(stats.kstwo.sf(statistic, x.size)))
