"""
laws.py
=======
Catalog of discrete laws and positive measures used as branching numbers,
invariant targets and unnormalized invariant measures of the Lamperti chain.

Every law stores its survival function P(X > j) as the primary evaluator and
derives cdf and pmf from it, so deep upper tails keep full relative accuracy.
Where the family allows it, `pgf_complement(t) = 1 - Phi(1 - t)` is given in
closed form without cancellation; this is what the tail-space inversion in
`lamperti.design` works with.

Families (target identifiers):
  geometric, negative-binomial, shifted-negative-binomial, fisher, sibuya,
  pareto, zipf, log-tail, binomial-restricted, binomial-shifted,
  poisson-shifted, poisson-positive, finite
Measures:
  counting, linear, harmonic

Usage:
  from lamperti.laws import make_target, pgf_eval
  law = make_target("geometric", {"p": 0.5})
  pgf_eval(law, 0.3)
"""

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, optimize, special, stats

from lamperti.config import (
    BISECTION_MAX_ITER,
    CM_TOL,
    EULER_GAMMA,
    EXACT_SUM_TERMS,
    EXPECTED_MAX_MAX_BLOCK,
    EXPECTED_MAX_RTOL,
    HEAVY_HORIZON,
    LIGHT_HORIZON,
    LOG_TAIL_HEAD,
    PGF_MAX_TERMS,
    PGF_TAIL_TOL,
    TRAPEZOID_POINTS,
)
from lamperti.errors import ParameterError, RuntimeCapError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, int, Sequence[float], np.ndarray]
ArrayFn = Callable[[np.ndarray], np.ndarray]


def _restore(values: np.ndarray, scalar: bool):
    return float(values[0]) if scalar else values


# ──────────────────────────────────────────────
# Dyadic summation of slowly decaying sequences
# ──────────────────────────────────────────────
def dyadic_sum(
    term: ArrayFn,
    start: int = 0,
    stop: Optional[int] = None,
    regime: Optional[Callable[[float], bool]] = None,
    exact_terms: int = EXACT_SUM_TERMS,
    rtol: float = EXPECTED_MAX_RTOL,
) -> float:
    """Sum term(j) for start <= j < stop over the blocks [2^k, 2^(k+1)).

    Blocks no longer than `exact_terms` are summed term by term; longer ones
    use the trapezoid rule with endpoint correction, which assumes `term` is
    smooth and nonincreasing there. Summation stops once a block falls below
    rtol * total and halves the previous one. While `regime(j)` holds at the
    block start, five consecutive block ratios above 0.9 declare the series
    divergent and inf is returned.
    """
    total = 0.0
    previous = None
    ratio = 0.0
    growth_run = 0
    lo = int(start)
    hi = max(2, 1 << lo.bit_length())
    while stop is None or lo < stop:
        if stop is not None:
            hi = min(hi, stop)
        if hi - lo <= exact_terms:
            block = math.fsum(term(np.arange(lo, hi, dtype=float)))
        else:
            x = np.linspace(lo, hi, TRAPEZOID_POINTS)
            f = term(x)
            block = float(integrate.trapezoid(f, x) + 0.5 * (f[0] - f[-1]))
        total += block
        if previous is not None:
            if previous > 0.0:
                ratio = block / previous
                if regime is not None and regime(lo) and ratio > 0.9:
                    growth_run += 1
                    if growth_run >= 5:
                        logger.debug("dyadic_sum: block ratio %.3f for 5 blocks up to j=%d, divergent", ratio, hi)
                        return math.inf
                else:
                    growth_run = 0
                if block <= rtol * total and ratio <= 0.5:
                    return total
            elif block == 0.0:
                return total
        previous = block
        lo, hi = hi, 2 * hi
        if hi.bit_length() > EXPECTED_MAX_MAX_BLOCK + 1:
            if ratio >= 1.0:
                return math.inf
            logger.warning("dyadic_sum: closing a slowly decaying sum at j=2^%d with a geometric remainder",
                           EXPECTED_MAX_MAX_BLOCK)
            return total + block * ratio / (1.0 - ratio)
    return total


# ──────────────────────────────────────────────
# DiscreteLaw / PositiveMeasure
# ──────────────────────────────────────────────
@dataclass(frozen=True)
class DiscreteLaw:
    """Law on {lower, ..., N} (finite) or {lower, lower+1, ...} (countable)."""

    label: str
    tail_fn: ArrayFn = field(repr=False)
    N: Optional[int] = None
    lower: int = 1
    pmf_fn: Optional[ArrayFn] = field(default=None, repr=False)
    pgf_fn: Optional[ArrayFn] = field(default=None, repr=False)
    complement_fn: Optional[ArrayFn] = field(default=None, repr=False)
    mean_value: Optional[float] = None
    horizon: float = HEAVY_HORIZON
    params: Mapping[str, Any] = field(default_factory=dict)

    @property
    def is_finite(self) -> bool:
        return self.N is not None

    def _inside(self, x: np.ndarray) -> np.ndarray:
        mask = x >= self.lower
        if self.N is not None:
            mask &= x <= self.N
        return mask

    def tail(self, j: ArrayLike):
        """P(X > j)."""
        scalar = np.ndim(j) == 0
        x = np.atleast_1d(np.asarray(j, dtype=float))
        out = np.ones(x.shape)
        mask = x >= self.lower
        if self.N is not None:
            out[x >= self.N] = 0.0
            mask &= x < self.N
        if np.any(mask):
            out[mask] = np.clip(self.tail_fn(x[mask]), 0.0, 1.0)
        return _restore(out, scalar)

    def cdf(self, j: ArrayLike):
        scalar = np.ndim(j) == 0
        out = 1.0 - np.atleast_1d(self.tail(j))
        return _restore(out, scalar)

    def pmf(self, j: ArrayLike):
        scalar = np.ndim(j) == 0
        x = np.atleast_1d(np.asarray(j, dtype=float))
        out = np.zeros(x.shape)
        mask = self._inside(x)
        if np.any(mask):
            if self.pmf_fn is not None:
                out[mask] = self.pmf_fn(x[mask])
            else:
                out[mask] = np.atleast_1d(self.tail(x[mask] - 1.0)) - np.atleast_1d(self.tail(x[mask]))
        return _restore(np.maximum(out, 0.0), scalar)

    def pmf_vector(self, count: int) -> np.ndarray:
        """pmf at lower, lower+1, ..., lower+count-1."""
        return np.atleast_1d(self.pmf(np.arange(self.lower, self.lower + count, dtype=float)))

    def pgf(self, z: ArrayLike):
        if self.pgf_fn is not None:
            return self.pgf_fn(np.asarray(z, dtype=float)) if np.ndim(z) else float(self.pgf_fn(float(z)))
        return _generic_pgf(self, float(z), PGF_TAIL_TOL)

    def pgf_complement(self, t: ArrayLike):
        """1 - Phi(1 - t), the probability that a t-thinning of X keeps something."""
        scalar = np.ndim(t) == 0
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        if self.complement_fn is not None:
            out = np.asarray(self.complement_fn(tt), dtype=float)
        else:
            out = np.array([_generic_complement(self, float(v)) for v in tt])
        return _restore(np.clip(out, 0.0, 1.0), scalar)

    @property
    def mean(self) -> float:
        if self.mean_value is not None:
            return self.mean_value
        stop = None if self.N is None else self.N
        return dyadic_sum(lambda j: np.atleast_1d(self.tail(j)), start=0, stop=stop,
                          regime=lambda j: self.tail(j) < 0.1)

    @classmethod
    def from_pmf(cls, pmf: Sequence[float], lower: int = 0, label: str = "explicit") -> "DiscreteLaw":
        """Finite law with the given pmf on {lower, ..., lower + len(pmf) - 1}."""
        w = np.asarray(pmf, dtype=float).ravel()
        if w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ParameterError("pmf must be a nonempty vector of finite nonnegative reals")
        total = math.fsum(w)
        if abs(total - 1.0) > 1e-10:
            raise ParameterError(f"pmf must sum to 1, got {total!r}")
        w = w / total
        upper = np.cumsum(w[::-1])[::-1]
        tails = np.append(upper[1:], 0.0)
        support = np.arange(lower, lower + w.size, dtype=float)

        def index(j):
            return (np.asarray(j) - lower).astype(np.int64)

        def pgf_fn(z):
            return np.power(z, lower) * np.polynomial.polynomial.polyval(z, w)

        def complement_fn(t):
            t = np.atleast_1d(t)
            terms = -np.expm1(np.outer(np.log1p(-t), support))
            return terms @ w

        return cls(
            label=label,
            tail_fn=lambda j: tails[index(j)],
            N=lower + w.size - 1,
            lower=lower,
            pmf_fn=lambda j: w[index(j)],
            pgf_fn=pgf_fn,
            complement_fn=complement_fn,
            mean_value=float(math.fsum(w * support)),
            horizon=float(lower + w.size - 1),
            params={"weights": w.tolist(), "lower": lower},
        )


@dataclass(frozen=True)
class PositiveMeasure:
    """Nonnegative sequence delta(j), j >= 1, with partial sums F_inf(j)."""

    label: str
    delta_fn: ArrayFn = field(repr=False)
    partial_fn: ArrayFn = field(repr=False)
    pgf_fn: Optional[ArrayFn] = field(default=None, repr=False)
    near_one_fn: Optional[ArrayFn] = field(default=None, repr=False)
    summable: bool = False
    params: Mapping[str, Any] = field(default_factory=dict)

    def delta(self, j: ArrayLike):
        scalar = np.ndim(j) == 0
        x = np.atleast_1d(np.asarray(j, dtype=float))
        out = np.where(x >= 1, self.delta_fn(np.maximum(x, 1.0)), 0.0)
        return _restore(out, scalar)

    def partial_sum(self, j: ArrayLike):
        scalar = np.ndim(j) == 0
        x = np.atleast_1d(np.asarray(j, dtype=float))
        out = np.where(x >= 1, self.partial_fn(np.maximum(x, 1.0)), 0.0)
        return _restore(out, scalar)

    def pgf(self, z: float) -> float:
        z = float(z)
        if z >= 1.0 and not self.summable:
            raise ParameterError(f"measure {self.label!r} is not summable; its pgf diverges at z = 1")
        if self.pgf_fn is not None:
            return float(self.pgf_fn(z))
        return _generic_measure_pgf(self, z, PGF_TAIL_TOL)

    def pgf_near_one(self, t: ArrayLike):
        """Phi(1 - t) for t in (0, 1], without forming 1 - t."""
        if self.near_one_fn is not None:
            return self.near_one_fn(np.asarray(t, dtype=float))
        return np.array([self.pgf(1.0 - v) for v in np.atleast_1d(t)])

    @classmethod
    def from_delta(cls, delta: ArrayFn, label: str = "measure", summable: bool = False) -> "PositiveMeasure":
        def partial_fn(j):
            j = np.atleast_1d(j).astype(np.int64)
            top = int(j.max())
            sums = np.cumsum(delta(np.arange(1, top + 1, dtype=float)))
            return sums[j - 1]

        return cls(label=label, delta_fn=delta, partial_fn=partial_fn, summable=summable)


Target = Union[DiscreteLaw, PositiveMeasure]


# ──────────────────────────────────────────────
# Generic pgf evaluation
# ──────────────────────────────────────────────
def _generic_pgf(law: DiscreteLaw, z: float, tol: float) -> float:
    if z == 1.0:
        return 1.0
    if z == 0.0:
        return float(law.pmf(0)) if law.lower == 0 else 0.0
    total = 0.0
    lo = law.lower
    chunk = 4096
    while True:
        hi = lo + chunk if law.N is None else min(lo + chunk, law.N + 1)
        j = np.arange(lo, hi, dtype=float)
        total += math.fsum(law.pmf(j) * np.power(z, j))
        if law.N is not None and hi > law.N:
            return total
        bound = z ** hi * law.tail(hi - 1)
        if bound < tol * max(total, 1e-300):
            return total
        if hi - law.lower > PGF_MAX_TERMS:
            raise RuntimeCapError(f"pgf of {law.label!r} did not converge at z={z} within {PGF_MAX_TERMS} terms")
        lo = hi
        chunk *= 2


def _generic_complement(law: DiscreteLaw, t: float) -> float:
    """1 - Phi(1 - t) = t sum_{j >= 0} (1 - t)^j P(X > j)."""
    if t <= 0.0:
        return 0.0
    if t >= 1.0:
        return 1.0 - (float(law.pmf(0)) if law.lower == 0 else 0.0)
    log_keep = math.log1p(-t)

    def term(j):
        return t * np.exp(j * log_keep) * np.atleast_1d(law.tail(j))

    stop = None if law.N is None else law.N
    return dyadic_sum(term, start=0, stop=stop, rtol=PGF_TAIL_TOL)


def _generic_measure_pgf(measure: PositiveMeasure, z: float, tol: float) -> float:
    if z == 0.0:
        return 0.0
    total = 0.0
    lo = 1
    chunk = 4096
    while True:
        j = np.arange(lo, lo + chunk, dtype=float)
        terms = measure.delta(j) * np.power(z, j)
        total += math.fsum(terms)
        if terms[-1] < tol * (1.0 - z) * total and terms[-1] <= terms[0]:
            return total
        if lo > PGF_MAX_TERMS:
            raise RuntimeCapError(f"pgf of measure {measure.label!r} did not converge at z={z}")
        lo += chunk
        chunk *= 2


def pgf_eval(law: Target, z: float, tol: float = PGF_TAIL_TOL) -> float:
    """Phi(z) = sum_j z^j mass(j), summed until the tail bound is below tol."""
    z = float(z)
    if not 0.0 <= z <= 1.0:
        raise ParameterError(f"z must lie in [0, 1], got {z}")
    if isinstance(law, PositiveMeasure):
        return law.pgf(z)
    if law.pgf_fn is not None:
        return float(law.pgf_fn(z))
    return _generic_pgf(law, z, tol)


# ──────────────────────────────────────────────
# Parameters
# ──────────────────────────────────────────────
def _param(params: Mapping[str, Any], key: str, lo: float = -math.inf, hi: float = math.inf,
           lo_open: bool = True, hi_open: bool = True, default: Optional[float] = None) -> float:
    if key not in params or params[key] is None:
        if default is None:
            raise ParameterError(f"missing parameter {key!r}")
        return default
    try:
        value = float(params[key])
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"parameter {key!r} must be a number, got {params[key]!r}") from exc
    below = value <= lo if lo_open else value < lo
    above = value >= hi if hi_open else value > hi
    if below or above or math.isnan(value):
        left = "(" if lo_open else "["
        right = ")" if hi_open else "]"
        raise ParameterError(f"parameter {key}={value} outside {left}{lo}, {hi}{right}")
    return value


def _size(params: Mapping[str, Any]) -> int:
    n = _param(params, "size", 1, lo_open=False)
    if n != int(n):
        raise ParameterError(f"size must be an integer, got {n}")
    return int(n)


# ──────────────────────────────────────────────
# Target families
# ──────────────────────────────────────────────
def _geometric(params):
    p = _param(params, "p", 0.0, 1.0, hi_open=False)
    q = 1.0 - p
    if q == 0.0:
        return DiscreteLaw.from_pmf([1.0], lower=1, label="geometric")
    log_q = math.log(q)
    return DiscreteLaw(
        label="geometric",
        tail_fn=lambda j: np.exp(j * log_q),
        pmf_fn=lambda j: p * np.exp((j - 1.0) * log_q),
        pgf_fn=lambda z: p * z / (1.0 - q * z),
        complement_fn=lambda t: t / (p + q * t),
        mean_value=1.0 / p,
        horizon=LIGHT_HORIZON,
        params={"p": p},
    )


def _negative_binomial(params):
    alpha = _param(params, "alpha", 0.0)
    p = _param(params, "p", 0.0, 1.0)
    q = 1.0 - p
    norm = -math.expm1(alpha * math.log(p))
    return DiscreteLaw(
        label="negative-binomial",
        tail_fn=lambda j: stats.nbinom.sf(j, alpha, p) / norm,
        pmf_fn=lambda j: stats.nbinom.pmf(j, alpha, p) / norm,
        pgf_fn=lambda z: ((p / (1.0 - q * z)) ** alpha - p ** alpha) / norm,
        complement_fn=lambda t: -np.expm1(-alpha * np.log1p(q * t / p)) / norm,
        mean_value=alpha * q / p / norm,
        horizon=LIGHT_HORIZON,
        params={"alpha": alpha, "p": p},
    )


def _shifted_negative_binomial(params):
    alpha = _param(params, "alpha", 0.0)
    p = _param(params, "p", 0.0, 1.0)
    q = 1.0 - p
    return DiscreteLaw(
        label="shifted-negative-binomial",
        tail_fn=lambda j: stats.nbinom.sf(j - 1.0, alpha, p),
        pmf_fn=lambda j: stats.nbinom.pmf(j - 1.0, alpha, p),
        pgf_fn=lambda z: z * (p / (1.0 - q * z)) ** alpha,
        complement_fn=lambda t: -np.expm1(np.log1p(-t) - alpha * np.log1p(q * t / p)),
        mean_value=1.0 + alpha * q / p,
        horizon=LIGHT_HORIZON,
        params={"alpha": alpha, "p": p},
    )


def _fisher(params):
    p = _param(params, "p", 0.0, 1.0)
    q = 1.0 - p
    c = -math.log1p(-p)
    return DiscreteLaw(
        label="fisher",
        tail_fn=lambda j: stats.logser.sf(j, p),
        pmf_fn=lambda j: np.power(p, j) / (c * j),
        pgf_fn=lambda z: np.log1p(-p * z) / math.log1p(-p),
        complement_fn=lambda t: np.log1p(p * t / q) / c,
        mean_value=p / (q * c),
        horizon=LIGHT_HORIZON,
        params={"p": p},
    )


def _sibuya(params):
    alpha = _param(params, "alpha", 0.0, 1.0)
    log_norm = special.gammaln(1.0 - alpha)
    return DiscreteLaw(
        label="sibuya",
        tail_fn=lambda j: special.poch(j + 1.0, -alpha) * math.exp(-log_norm),
        pmf_fn=lambda j: np.exp(math.log(alpha) + special.gammaln(j - alpha) - log_norm - special.gammaln(j + 1.0)),
        pgf_fn=lambda z: 1.0 - (1.0 - z) ** alpha,
        complement_fn=lambda t: np.power(t, alpha),
        mean_value=math.inf,
        horizon=HEAVY_HORIZON,
        params={"alpha": alpha},
    )


def _pareto(params):
    alpha = _param(params, "alpha", 0.0)
    return DiscreteLaw(
        label="pareto",
        tail_fn=lambda j: np.power(j + 1.0, -alpha),
        pmf_fn=lambda j: -np.expm1(-alpha * np.log1p(1.0 / j)) * np.power(j, -alpha),
        mean_value=math.inf if alpha <= 1.0 else None,
        horizon=HEAVY_HORIZON,
        params={"alpha": alpha},
    )


def _zipf(params):
    alpha = _param(params, "alpha", 1.0)
    return DiscreteLaw(
        label="zipf",
        tail_fn=lambda j: stats.zipf.sf(j, alpha),
        pmf_fn=lambda j: stats.zipf.pmf(j, alpha),
        mean_value=math.inf if alpha <= 2.0 else float(special.zeta(alpha - 1.0) / special.zeta(alpha)),
        horizon=HEAVY_HORIZON,
        params={"alpha": alpha},
    )


def _binomial_restricted(params):
    p = _param(params, "p", 0.0, 1.0)
    n = _size(params)
    q = 1.0 - p
    norm = -math.expm1(n * math.log(q))
    return DiscreteLaw(
        label="binomial-restricted",
        tail_fn=lambda j: stats.binom.sf(j, n, p) / norm,
        N=n,
        pmf_fn=lambda j: stats.binom.pmf(j, n, p) / norm,
        pgf_fn=lambda z: ((q + p * z) ** n - q ** n) / norm,
        complement_fn=lambda t: -np.expm1(n * np.log1p(-p * t)) / norm,
        mean_value=n * p / norm,
        horizon=float(n),
        params={"p": p, "size": n},
    )


def _binomial_shifted(params):
    p = _param(params, "p", 0.0, 1.0)
    n = _size(params)
    q = 1.0 - p
    return DiscreteLaw(
        label="binomial-shifted",
        tail_fn=lambda j: stats.binom.sf(j - 1.0, n - 1, p),
        N=n,
        pmf_fn=lambda j: stats.binom.pmf(j - 1.0, n - 1, p),
        pgf_fn=lambda z: z * (q + p * z) ** (n - 1),
        complement_fn=lambda t: -np.expm1(np.log1p(-t) + (n - 1) * np.log1p(-p * t)),
        mean_value=1.0 + (n - 1) * p,
        horizon=float(n),
        params={"p": p, "size": n},
    )


def _poisson_shifted(params):
    lam = _param(params, "lam", 0.0)
    return DiscreteLaw(
        label="poisson-shifted",
        tail_fn=lambda j: stats.poisson.sf(j - 1.0, lam),
        pmf_fn=lambda j: stats.poisson.pmf(j - 1.0, lam),
        pgf_fn=lambda z: z * np.exp(lam * (z - 1.0)),
        complement_fn=lambda t: -np.expm1(np.log1p(-t) - lam * t),
        mean_value=1.0 + lam,
        horizon=LIGHT_HORIZON,
        params={"lam": lam},
    )


def _poisson_positive(params):
    lam = _param(params, "lam", 0.0)
    norm = -math.expm1(-lam)
    return DiscreteLaw(
        label="poisson-positive",
        tail_fn=lambda j: stats.poisson.sf(j, lam) / norm,
        pmf_fn=lambda j: stats.poisson.pmf(j, lam) / norm,
        pgf_fn=lambda z: np.expm1(lam * z) / math.expm1(lam),
        complement_fn=lambda t: -np.expm1(-lam * t) / norm,
        mean_value=lam / norm,
        horizon=LIGHT_HORIZON,
        params={"lam": lam},
    )


def _finite(params):
    weights = params.get("weights")
    if weights is None:
        raise ParameterError("finite target needs 'weights'")
    w = np.asarray(weights, dtype=float)
    if w.size == 0 or np.any(w < 0) or not w.sum() > 0:
        raise ParameterError("weights must be nonnegative with positive total")
    return DiscreteLaw.from_pmf(w / w.sum(), lower=1, label="finite")


# log-tail: delta(j) = 1 / (j log(1+j)^(beta+1)), no moments of any positive order
def log_tail_delta(j: ArrayLike, beta: float):
    j = np.asarray(j, dtype=float)
    return 1.0 / (j * np.power(np.log1p(j), beta + 1.0))


def log_tail_integral(u0: float, beta: float) -> float:
    """int_{u0}^inf e^u / ((e^u - 1) u^(beta+1)) du, the tail sum past the head."""
    # e^u / (e^u - 1) = 1 + e^{-u} / (1 - e^{-u})
    rest, _ = integrate.quad(lambda u: u ** (-beta - 1.0) * math.exp(-u) / -math.expm1(-u), u0, math.inf,
                             epsabs=0.0, epsrel=1e-12, limit=200)
    return u0 ** (-beta) / beta + rest


@functools.lru_cache(maxsize=32)
def _log_tail_head(beta: float, head: int) -> Tuple[np.ndarray, float]:
    masses = log_tail_delta(np.arange(1, head + 1, dtype=float), beta)
    # suffix[m] = sum_{m < j <= head} delta(j)
    suffix = np.append(np.cumsum(masses[::-1])[::-1], 0.0)
    return suffix, log_tail_integral(math.log(head + 1.5), beta)


def log_tail_upper_sum(i: ArrayLike, beta: float, head: int = LOG_TAIL_HEAD):
    """Unnormalized tail sum_{j > i} delta(j): exact head plus midpoint-spliced integral."""
    scalar = np.ndim(i) == 0
    x = np.atleast_1d(np.asarray(i, dtype=float))
    suffix, past_head = _log_tail_head(float(beta), int(head))
    out = np.empty(x.shape)
    for k, v in enumerate(x):
        if v < head:
            out[k] = suffix[int(max(v, 0))] + past_head
        else:
            out[k] = log_tail_integral(math.log(v + 1.5), beta)
    return _restore(out, scalar)


def _log_tail(params):
    beta = _param(params, "beta", 0.0)
    total = float(log_tail_upper_sum(0.0, beta))
    return DiscreteLaw(
        label="log-tail",
        tail_fn=lambda j: log_tail_upper_sum(j, beta) / total,
        pmf_fn=lambda j: log_tail_delta(j, beta) / total,
        mean_value=math.inf,
        horizon=math.inf,
        params={"beta": beta, "normalizer": total},
    )


# ──────────────────────────────────────────────
# Measure families
# ──────────────────────────────────────────────
def _counting(params):
    return PositiveMeasure(
        label="counting",
        delta_fn=lambda j: np.ones_like(j),
        partial_fn=lambda j: j,
        pgf_fn=lambda z: z / (1.0 - z),
        near_one_fn=lambda t: (1.0 - t) / t,
    )


def _linear(params):
    return PositiveMeasure(
        label="linear",
        delta_fn=lambda j: j,
        partial_fn=lambda j: j * (j + 1.0) / 2.0,
        pgf_fn=lambda z: z / (1.0 - z) ** 2,
        near_one_fn=lambda t: (1.0 - t) / (t * t),
    )


def harmonic_number(j: ArrayLike):
    return special.digamma(np.asarray(j, dtype=float) + 1.0) + EULER_GAMMA


def _harmonic(params):
    return PositiveMeasure(
        label="harmonic",
        delta_fn=lambda j: 1.0 / j,
        partial_fn=harmonic_number,
        pgf_fn=lambda z: -math.log1p(-z),
        near_one_fn=lambda t: -np.log(t),
    )


TARGETS = {
    "geometric": _geometric,
    "negative-binomial": _negative_binomial,
    "shifted-negative-binomial": _shifted_negative_binomial,
    "fisher": _fisher,
    "sibuya": _sibuya,
    "pareto": _pareto,
    "zipf": _zipf,
    "log-tail": _log_tail,
    "binomial-restricted": _binomial_restricted,
    "binomial-shifted": _binomial_shifted,
    "poisson-shifted": _poisson_shifted,
    "poisson-positive": _poisson_positive,
    "finite": _finite,
}

MEASURES = {
    "counting": _counting,
    "linear": _linear,
    "harmonic": _harmonic,
}


def make_target(name: str, params: Optional[Mapping[str, Any]] = None, **kwargs) -> Target:
    """Build the law or measure registered under `name`."""
    merged = dict(params or {})
    merged.update(kwargs)
    key = name.lower()
    if key.endswith("-design"):
        key = key[: -len("-design")]
    if key in TARGETS:
        return TARGETS[key](merged)
    if key in MEASURES:
        return MEASURES[key](merged)
    raise ParameterError(f"unknown family {name!r}; known: {sorted(TARGETS) + sorted(MEASURES)}")


# ──────────────────────────────────────────────
# Tail helpers
# ──────────────────────────────────────────────
def bernoulli_sequence_tail(success_probs: Sequence[float]) -> np.ndarray:
    """P(X > i) = prod_{j <= i} (1 - alpha_j) for a sequential Bernoulli stopping rule."""
    a = np.asarray(success_probs, dtype=float)
    if np.any((a < 0) | (a > 1)):
        raise ParameterError("success probabilities must lie in [0, 1]")
    return np.cumprod(1.0 - a)


def reversed_failure_rate(target: Target, j_max: int) -> np.ndarray:
    """delta(j) / F_inf(j) for j = 1..j_max."""
    j = np.arange(1, j_max + 1, dtype=float)
    if isinstance(target, PositiveMeasure):
        return target.delta(j) / target.partial_sum(j)
    return target.pmf(j) / target.cdf(j)


def sibuya_limit_constant(alpha: float) -> float:
    """lim j P(nu > j) for the Sibuya design, Gamma(1 - alpha)^(-1/alpha)."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    return math.exp(-special.gammaln(1.0 - alpha) / alpha)


def cm_check(law: DiscreteLaw, k_max: int = 10, j_max: int = 50) -> bool:
    """True iff (-1)^k Delta^k P(X > j) >= -1e-12 for k <= k_max and j <= j_max."""
    if k_max < 1:
        raise ParameterError(f"k_max must be >= 1, got {k_max}")
    tails = np.atleast_1d(law.tail(np.arange(0, j_max + k_max + 1, dtype=float)))
    for k in range(1, k_max + 1):
        signed = (-1) ** k * np.diff(tails, k)[: j_max + 1]
        if np.any(signed < -CM_TOL):
            logger.debug("cm_check(%s): order %d fails at j=%d", law.label, k, int(np.argmin(signed)))
            return False
    return True


# ──────────────────────────────────────────────
# Extinction (offspring laws on {0, 1, ...})
# ──────────────────────────────────────────────
def _offspring_pmf(nu: DiscreteLaw) -> np.ndarray:
    if nu.lower != 0:
        raise ParameterError("offspring law must be supported on {0, 1, ...}")
    if nu.is_finite:
        return nu.pmf_vector(nu.N + 1)
    top = 64
    while nu.tail(top) > 1e-17:
        top *= 2
        if top > PGF_MAX_TERMS:
            raise RuntimeCapError(f"offspring law {nu.label!r} has no usable truncation point")
    return nu.pmf_vector(top + 1)


def extinction_probability(nu: DiscreteLaw) -> float:
    """Smallest root of phi(z) = z in [0, 1]; 1 when E(nu) <= 1."""
    if nu.lower != 0 or not nu.pmf(0) > 0:
        raise ParameterError("extinction needs an offspring law with P(nu = 0) > 0")
    if nu.mean <= 1.0:
        return 1.0

    def gap(z):
        return float(nu.pgf(z)) - z

    hi = None
    for k in range(1, 60):
        z = 1.0 - 2.0 ** (-k)
        if gap(z) < 0:
            hi = z
            break
    if hi is None:
        return 1.0
    return float(optimize.bisect(gap, 0.0, hi, xtol=1e-16, maxiter=BISECTION_MAX_ITER))


def _conditioning_root(nu: DiscreteLaw) -> float:
    rho = extinction_probability(nu)
    if not 0.0 < rho < 1.0:
        raise ParameterError(f"conditioning needs 0 < rho_e < 1, got rho_e = {rho}")
    return rho


def condition_on_extinction(nu: DiscreteLaw) -> DiscreteLaw:
    """nu_e with pgf phi(z rho)/rho: p_e(j) = p(j) rho^(j-1)."""
    rho = _conditioning_root(nu)
    p = _offspring_pmf(nu)
    j = np.arange(p.size, dtype=float)
    pe = p * np.power(rho, j - 1.0)
    return DiscreteLaw.from_pmf(pe / pe.sum(), lower=0, label=f"{nu.label}|extinction")


def condition_on_survival(nu: DiscreteLaw) -> DiscreteLaw:
    """p_s(j) = p(j)(1 - rho^j)/(1 - rho), the offspring law on the survival event."""
    rho = _conditioning_root(nu)
    p = _offspring_pmf(nu)
    j = np.arange(p.size, dtype=float)
    ps = p * -np.expm1(j * math.log(rho)) / (1.0 - rho)
    return DiscreteLaw.from_pmf(ps / ps.sum(), lower=0, label=f"{nu.label}|survival")


def condition_on_explosion(nu: DiscreteLaw) -> DiscreteLaw:
    """nu_ebar with pgf (phi(rho + z(1-rho)) - rho)/(1-rho): surviving lines only."""
    rho = _conditioning_root(nu)
    p = _offspring_pmf(nu)
    j = np.arange(p.size)
    k = np.arange(p.size)
    thinning = stats.binom.pmf(k[None, :], j[:, None], 1.0 - rho)
    mass = (p / (1.0 - rho)) @ thinning
    mass[0] = 0.0
    return DiscreteLaw.from_pmf(mass / mass.sum(), lower=0, label=f"{nu.label}|explosion")
