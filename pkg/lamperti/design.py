"""
design.py
=========
Inverse design: given a target invariant law (or an unnormalized invariant
measure) find the branching cdf F solving F_inf(j) = Phi_inf(F(j)).

Two routes are kept side by side:
  * bisection (production): monotone inversion of the target pgf, done in
    tail space, pgf_complement(t) = P(X_inf > j) with t = P(nu > j), when the
    target tail is below 1/2 and in cdf space otherwise;
  * series: F(j) = sum_n h_n (F_inf(j)/pi(1))^n from the Lagrange engine in
    `lamperti.series`, continued by Pade outside its disk.

Closed forms for the families that have one serve as oracles, and
`branching_law` turns any design into a DiscreteLaw for classification,
expected maxima and simulation.

Output:
  DesignTable, convertible to a (j, F, tail, F_inf, ...) DataFrame
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import integrate, optimize, stats

from lamperti.config import (
    BISECTION_MAX_ITER,
    BISECTION_TOL,
    FINITE_SNAP_TOL,
    LOG_TAIL_HEAD,
    MONOTONE_NOISE,
    ORACLE_TOL,
    SERIES_N_MAX,
    SNAP_TOL,
)
from lamperti.errors import ParameterError, RuntimeCapError, SeriesDivergenceError, ValidationError
from lamperti.laws import (
    DiscreteLaw,
    PositiveMeasure,
    Target,
    bernoulli_sequence_tail,
    harmonic_number,
    log_tail_delta,
    log_tail_integral,
    log_tail_upper_sum,
    make_target,
)
from lamperti.series import PowerSeries, evaluate_inverse, lagrange_inverse_coeffs, lambert_w_scaled

logger = logging.getLogger(__name__)

METHODS = ("series", "bisection", "both")


@dataclass(frozen=True)
class DesignTable:
    label: str
    j: np.ndarray
    F: np.ndarray
    tail: np.ndarray
    F_inf: np.ndarray
    method: str
    F_series: Optional[np.ndarray] = None
    series_method: Optional[Tuple[str, ...]] = None
    discrepancy: Optional[float] = None

    @property
    def N(self) -> int:
        return int(self.j[-1])

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"j": self.j, "F": self.F, "tail": self.tail, "F_inf": self.F_inf})
        if self.F_series is not None:
            frame["F_series"] = self.F_series
            frame["series_method"] = list(self.series_method)
            frame["abs_discrepancy"] = np.abs(self.F_series - self.F)
        return frame


# ──────────────────────────────────────────────
# Bisection
# ──────────────────────────────────────────────
def _bisect(fn: Callable[[np.ndarray], np.ndarray], targets: np.ndarray, lo: np.ndarray, hi: np.ndarray,
            scale: np.ndarray, geometric: bool = False) -> np.ndarray:
    """Vectorized bisection for increasing fn; stops at |fn(x) - y| <= tol*scale or a one-ulp bracket."""
    y = np.asarray(targets, dtype=float)
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    x = np.where(geometric, np.sqrt(lo * hi), 0.5 * (lo + hi))
    active = np.ones(y.shape, dtype=bool)
    for _ in range(BISECTION_MAX_ITER):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            return x
        mid = np.sqrt(lo[idx] * hi[idx]) if geometric else 0.5 * (lo[idx] + hi[idx])
        x[idx] = mid
        val = np.asarray(fn(mid), dtype=float)
        below = val < y[idx]
        lo[idx] = np.where(below, mid, lo[idx])
        hi[idx] = np.where(below, hi[idx], mid)
        close = np.abs(val - y[idx]) <= BISECTION_TOL * scale[idx]
        collapsed = hi[idx] - lo[idx] <= 2.0 * np.spacing(hi[idx])
        active[idx[close | collapsed]] = False
    if active.any():
        raise RuntimeCapError(f"bisection did not converge within {BISECTION_MAX_ITER} iterations")
    return x


def _lower_bracket(fn: Callable[[np.ndarray], np.ndarray], targets: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Positive lo with fn(lo) < target, stepping down from hi by 2^-8."""
    lo = hi * 2.0 ** -8
    for _ in range(140):
        bad = np.asarray(fn(lo)) >= targets
        if not bad.any():
            return lo
        lo = np.where(bad, lo * 2.0 ** -8, lo)
    raise RuntimeCapError("could not bracket the branching tail from below")


def _vector_pgf(law: DiscreteLaw) -> Callable[[np.ndarray], np.ndarray]:
    if law.pgf_fn is not None:
        return lambda x: law.pgf_fn(np.asarray(x, dtype=float))
    return lambda x: np.array([law.pgf(float(v)) for v in np.atleast_1d(x)])


def invert_pgf_bisection(phi: Callable[[float], float], y: float, hi: float = 1.0) -> float:
    """x in [0, hi] with phi(x) = y for a strictly increasing pgf evaluator phi."""
    y = float(y)
    top = float(phi(hi))
    if y < 0.0 or y > top + BISECTION_TOL * max(1.0, top):
        raise ParameterError(f"y={y} outside the pgf range [0, {top}]")
    if y == 0.0:
        return 0.0
    fn = lambda xs: np.array([phi(float(v)) for v in np.atleast_1d(xs)])
    return float(_bisect(fn, np.array([y]), np.array([0.0]), np.array([hi]),
                         scale=np.array([max(1.0, y)]))[0])


def solve_branching_tails(target: DiscreteLaw, target_tail: Sequence[float]) -> np.ndarray:
    """P(nu > j) from P(X_inf > j) through the functional equation, entrywise."""
    T = np.atleast_1d(np.asarray(target_tail, dtype=float))
    t = np.zeros(T.shape)
    deep = (T > 0.0) & (T < 0.5)
    if deep.any():
        y = T[deep]
        hi = np.minimum(1.0, y)
        lo = _lower_bracket(target.pgf_complement, y, hi)
        t[deep] = _bisect(target.pgf_complement, y, lo, hi, scale=y, geometric=True)
    shallow = T >= 0.5
    if shallow.any():
        y = 1.0 - T[shallow]
        F = _bisect(_vector_pgf(target), y, np.zeros(y.shape), np.ones(y.shape), scale=np.maximum(1.0, y))
        t[shallow] = 1.0 - F
    return t


def _measure_tails(measure: PositiveMeasure, partial: np.ndarray) -> np.ndarray:
    """P(nu > j) from Phi_delta(1 - t) = F_inf(j) for a non-summable measure."""
    fn = lambda t: -np.asarray(measure.pgf_near_one(t), dtype=float)
    targets = -np.asarray(partial, dtype=float)
    hi = np.ones(targets.shape)
    lo = _lower_bracket(fn, targets, hi)
    return _bisect(fn, targets, lo, hi, scale=np.abs(targets), geometric=True)


# ──────────────────────────────────────────────
# Series route
# ──────────────────────────────────────────────
def _series_column(psi: PowerSeries, x: np.ndarray, n_max: int, max_part: Optional[int],
                   strict: bool) -> Tuple[np.ndarray, Tuple[str, ...]]:
    coeffs = lagrange_inverse_coeffs(psi, n_max=n_max, x_max=float(np.max(x)), max_part=max_part)
    values = np.full(x.shape, np.nan)
    methods = []
    for k, xv in enumerate(x):
        try:
            result = evaluate_inverse(coeffs, float(xv))
        except SeriesDivergenceError:
            if strict:
                raise
            logger.warning("series route unavailable at F_inf=%g; compared by bisection only", xv)
            methods.append("none")
            continue
        values[k] = result.value
        methods.append(result.method)
    return values, tuple(methods)


def _finalize(label: str, j: np.ndarray, F_inf: np.ndarray, tails: Optional[np.ndarray],
              F_series: Optional[np.ndarray], series_method, method: str,
              finite: bool, measure: bool = False) -> DesignTable:
    if method == "series":
        F = np.array(F_series, dtype=float)
        tails = 1.0 - F
    else:
        F = 1.0 - tails
    if np.any(~np.isfinite(F)) or np.any(F < -MONOTONE_NOISE) or np.any(F > 1.0 + SNAP_TOL):
        raise ValidationError(f"design {label!r} is not a cdf (values outside [0, 1])")
    steps = np.diff(F)
    if np.any(steps < -MONOTONE_NOISE):
        bad = int(np.argmin(steps)) + 1
        raise ValidationError(f"design {label!r} is not monotone at j={int(j[bad])} (drop {-steps[bad - 1]:.3g})")
    F = np.maximum.accumulate(np.clip(F, 0.0, 1.0))
    tails = np.minimum.accumulate(np.clip(tails, 0.0, 1.0))
    if not measure:
        short = F < F_inf - MONOTONE_NOISE
        if short.any():
            bad = int(np.flatnonzero(short)[0])
            raise ValidationError(f"design {label!r} violates F >= F_inf at j={int(j[bad])}")
    if finite:
        if abs(F[-1] - 1.0) > FINITE_SNAP_TOL:
            raise ValidationError(f"finite design {label!r} ends at F(N)={F[-1]!r}, not 1")
        F[-1] = 1.0
        tails[-1] = 0.0
    else:
        F = np.where(F > 1.0 - SNAP_TOL, 1.0, F)

    discrepancy = None
    if method == "both":
        available = np.isfinite(F_series)
        if available.any():
            discrepancy = float(np.max(np.abs(F_series[available] - F[available])))
            if discrepancy > ORACLE_TOL:
                raise ValidationError(
                    f"series and bisection routes disagree by {discrepancy:.3g} for {label!r}")
        else:
            logger.warning("no certified series values for %s; discrepancy not computed", label)
            discrepancy = math.nan
    return DesignTable(label=label, j=j, F=F, tail=tails, F_inf=F_inf, method=method,
                       F_series=F_series if method == "both" else None,
                       series_method=series_method if method == "both" else None,
                       discrepancy=discrepancy)


def _check_method(method: str) -> None:
    if method not in METHODS:
        raise ParameterError(f"method must be one of {METHODS}, got {method!r}")


# ──────────────────────────────────────────────
# Design operations
# ──────────────────────────────────────────────
def design_branching(target: Target, j_max: int, method: str = "bisection",
                     n_max: int = SERIES_N_MAX) -> DesignTable:
    """Branching cdf F(1..j_max) realizing `target` as invariant law."""
    _check_method(method)
    if isinstance(target, PositiveMeasure):
        return design_from_measure(target, j_max, method, n_max)
    if target.lower != 1:
        raise ParameterError("target must be supported on {1, 2, ...}")
    if not target.pmf(1) > 0:
        raise ParameterError("target needs pi(1) > 0")
    if j_max < 1:
        raise ParameterError(f"j_max must be >= 1, got {j_max}")
    if target.is_finite:
        table = design_branching_finite(target.pmf_vector(target.N), method, n_max)
        return _slice(table, j_max)

    j = np.arange(1, j_max + 1, dtype=float)
    T = np.atleast_1d(target.tail(j))
    F_inf = 1.0 - T
    tails = solve_branching_tails(target, T) if method != "series" else None
    F_series, series_method = None, None
    if method != "bisection":
        psi = PowerSeries(target.pmf_vector(n_max))
        F_series, series_method = _series_column(psi, F_inf, n_max, None, strict=method == "series")
    table = _finalize(target.label, j.astype(int), F_inf, tails, F_series, series_method, method, finite=False)
    logger.info("designed %s for j <= %d by %s", target.label, j_max, method)
    return table


def _slice(table: DesignTable, j_max: int) -> DesignTable:
    if j_max >= table.N:
        return table
    cut = slice(0, j_max)
    return DesignTable(
        label=table.label, j=table.j[cut], F=table.F[cut], tail=table.tail[cut], F_inf=table.F_inf[cut],
        method=table.method,
        F_series=None if table.F_series is None else table.F_series[cut],
        series_method=None if table.series_method is None else table.series_method[cut],
        discrepancy=table.discrepancy,
    )


def design_branching_finite(pi_N: Sequence[float], method: str = "bisection",
                            n_max: int = SERIES_N_MAX) -> DesignTable:
    """F_(N)(1..N) for a target probability vector on {1..N}; F_(N)(N) is exactly 1."""
    _check_method(method)
    pi = np.asarray(pi_N, dtype=float).ravel()
    if pi.size == 0 or np.any(pi < 0):
        raise ParameterError("pi_N must be a nonempty nonnegative vector")
    if abs(math.fsum(pi) - 1.0) > 1e-10:
        raise ParameterError(f"pi_N must sum to 1, got {math.fsum(pi)!r}")
    if not pi[0] > 0:
        raise ParameterError("pi_N(1) must be positive")
    N = pi.size
    if N == 1:
        one = np.ones(1)
        return DesignTable(label="finite", j=np.array([1]), F=one, tail=np.zeros(1), F_inf=one, method=method,
                           F_series=one.copy() if method == "both" else None,
                           series_method=("direct",) if method == "both" else None,
                           discrepancy=0.0 if method == "both" else None)
    law = DiscreteLaw.from_pmf(pi, lower=1, label="finite")
    j = np.arange(1, N + 1, dtype=float)
    T = np.atleast_1d(law.tail(j))
    F_inf = 1.0 - T
    F_inf[-1] = 1.0
    tails = None
    if method != "series":
        tails = np.zeros(N)
        tails[:-1] = solve_branching_tails(law, T[:-1])
    F_series, series_method = None, None
    if method != "bisection":
        psi = PowerSeries(pi, order=n_max - 1)
        F_series, series_method = _series_column(psi, F_inf, n_max, N - 1, strict=method == "series")
    return _finalize("finite", j.astype(int), F_inf, tails, F_series, series_method, method, finite=True)


def design_from_measure(delta: PositiveMeasure, j_max: int, method: str = "bisection",
                        n_max: int = SERIES_N_MAX) -> DesignTable:
    """F(j) for an unnormalized invariant measure; only F_inf(j)/delta(1) matters."""
    _check_method(method)
    if not delta.delta(1) > 0:
        raise ParameterError("measure needs delta(1) > 0")
    j = np.arange(1, j_max + 1, dtype=float)
    S = np.atleast_1d(delta.partial_sum(j))
    tails = _measure_tails(delta, S) if method != "series" else None
    F_series, series_method = None, None
    if method != "bisection":
        psi = PowerSeries(delta.delta(np.arange(1, n_max + 1, dtype=float)))
        F_series, series_method = _series_column(psi, S, n_max, None, strict=method == "series")
    return _finalize(delta.label, j.astype(int), S, tails, F_series, series_method, method,
                     finite=False, measure=True)


# ──────────────────────────────────────────────
# Closed forms
# ──────────────────────────────────────────────
def _geometric_tail(params):
    p = float(params["p"])
    q = 1.0 - p
    if q == 0.0:
        return lambda j: np.zeros_like(np.asarray(j, dtype=float))
    log_q = math.log(q)
    return lambda j: p * np.exp(j * log_q) / -np.expm1((j + 1.0) * log_q)


def _negative_binomial_tail(params):
    alpha, p = float(params["alpha"]), float(params["p"])
    q = 1.0 - p
    return lambda j: p * np.expm1(-np.log1p(-stats.nbinom.sf(j, alpha, p)) / alpha) / q


def _fisher_tail(params):
    p = float(params["p"])
    c = -math.log1p(-p)
    return lambda j: (1.0 - p) * np.expm1(c * stats.logser.sf(j, p)) / p


def _sibuya_tail(params):
    alpha = float(params["alpha"])
    target = make_target("sibuya", params)
    return lambda j: np.power(target.tail(j), 1.0 / alpha)


def _poisson_positive_tail(params):
    lam = float(params["lam"])
    return lambda j: -np.log1p(-stats.poisson.sf(j, lam)) / lam


def _poisson_shifted_tail(params):
    lam = float(params["lam"])

    def tail(j):
        x = math.exp(lam) * stats.poisson.cdf(np.atleast_1d(j) - 1.0, lam)
        return 1.0 - np.array([lambert_w_scaled(lam, float(v)) for v in x])

    return tail


def _binomial_restricted_tail(params):
    p, n = float(params["p"]), int(params["size"])
    return lambda j: -np.expm1(np.log1p(-stats.binom.sf(j, n, p)) / n) / p


def _counting_tail(params):
    return lambda j: 1.0 / (1.0 + np.asarray(j, dtype=float))


def _linear_tail(params):
    def tail(j):
        j = np.asarray(j, dtype=float)
        m = j * (j + 1.0)
        return 2.0 / (np.sqrt(1.0 + 2.0 * m) + 1.0)

    return tail


def _harmonic_tail(params):
    return lambda j: np.exp(-harmonic_number(j))


CLOSED_TAILS = {
    "geometric": _geometric_tail,
    "negative-binomial": _negative_binomial_tail,
    "fisher": _fisher_tail,
    "sibuya": _sibuya_tail,
    "poisson-positive": _poisson_positive_tail,
    "poisson-shifted": _poisson_shifted_tail,
    "binomial-restricted": _binomial_restricted_tail,
    "counting": _counting_tail,
    "linear": _linear_tail,
    "harmonic": _harmonic_tail,
}


def _family_key(name: str) -> str:
    key = name.lower()
    return key[: -len("-design")] if key.endswith("-design") else key


def closed_form_design(name: str, params: Optional[Mapping[str, Any]], j_max: int) -> DesignTable:
    """Direct evaluation of the families whose branching cdf is explicit."""
    key = _family_key(name)
    if key not in CLOSED_TAILS:
        raise ParameterError(f"family {name!r} has no closed-form design; known: {sorted(CLOSED_TAILS)}")
    params = dict(params or {})
    target = make_target(key, params)
    if isinstance(target, DiscreteLaw) and target.is_finite:
        j_max = min(j_max, target.N)
    j = np.arange(1, j_max + 1, dtype=float)
    tails = np.asarray(CLOSED_TAILS[key](target.params if isinstance(target, DiscreteLaw) else params)(j),
                       dtype=float)
    tails = np.clip(tails, 0.0, 1.0)
    if isinstance(target, PositiveMeasure):
        F_inf = np.atleast_1d(target.partial_sum(j))
    else:
        F_inf = np.atleast_1d(target.cdf(j))
    return DesignTable(label=key, j=j.astype(int), F=1.0 - tails, tail=tails, F_inf=F_inf, method="closed")


# ──────────────────────────────────────────────
# Branching laws
# ──────────────────────────────────────────────
def _log_tail_thinning_mass(t: float, beta: float, head: int = LOG_TAIL_HEAD) -> float:
    """sum_j delta(j)(1 - (1 - t)^j) with the same head/integral splice as the target tail."""
    j = np.arange(1, head + 1, dtype=float)
    masses = log_tail_delta(j, beta)
    u0 = math.log(head + 1.5)
    if t >= 1.0:
        return math.fsum(masses) + log_tail_integral(u0, beta)
    s = -math.log1p(-t)
    head_sum = math.fsum(masses * -np.expm1(-s * j))
    cut = max(u0, math.log(1.0 / s) + 5.0)
    middle = 0.0
    log_s = math.log(s)

    def integrand(u):
        # s (e^u - 1) in log space; 1 - e^{-s j} saturates at 1 long before e^u overflows
        sj = math.exp(min(log_s + u, 700.0)) * -math.expm1(-u)
        return u ** (-beta - 1.0) / -math.expm1(-u) * -math.expm1(-sj)

    if cut > u0:
        middle, _ = integrate.quad(
            integrand, u0, cut, points=[min(max(math.log(1.0 / s), u0), cut)], epsabs=0.0, epsrel=1e-12, limit=200)
    return head_sum + middle + log_tail_integral(cut, beta)


def log_tail_branching(beta: float) -> DiscreteLaw:
    """Branching law for the log-tail target, P(nu > i) by root finding in log t."""
    if not beta > 0:
        raise ParameterError(f"beta must be positive, got {beta}")

    def solve_one(i: float) -> float:
        goal = float(log_tail_upper_sum(i, beta))
        excess = lambda lt: _log_tail_thinning_mass(math.exp(lt), beta) - goal
        lo = math.log(1e-6 / (i + 1.0))
        for _ in range(10):
            if excess(lo) < 0:
                break
            lo -= math.log(1e6)
        return math.exp(optimize.brentq(excess, lo, 0.0, xtol=1e-14, maxiter=BISECTION_MAX_ITER))

    def tail_fn(j):
        return np.array([solve_one(float(v)) for v in np.atleast_1d(j)])

    return DiscreteLaw(label="log-tail-design", tail_fn=tail_fn, params={"beta": beta})


def branching_law(name: str, params: Optional[Mapping[str, Any]] = None) -> DiscreteLaw:
    """The designed nu for a family, as a law with an evaluable tail."""
    key = _family_key(name)
    params = dict(params or {})
    target = make_target(key, params)
    if key == "log-tail":
        return log_tail_branching(float(target.params["beta"]))
    N = target.N if isinstance(target, DiscreteLaw) else None
    if key in CLOSED_TAILS:
        tail_fn = CLOSED_TAILS[key](target.params if isinstance(target, DiscreteLaw) else params)
    elif isinstance(target, PositiveMeasure):
        tail_fn = lambda j: _measure_tails(target, np.atleast_1d(target.partial_sum(j)))
    else:
        tail_fn = lambda j: solve_branching_tails(target, np.atleast_1d(target.tail(j)))
    return DiscreteLaw(label=f"{key}-design", tail_fn=lambda j: np.asarray(tail_fn(j), dtype=float),
                       N=N, params=dict(params))


def geometric_generation_tail(q: float, i: int) -> float:
    """prod_{j <= i} (1 - alpha_j) with alpha_j = 1/(1 + q + ... + q^j)."""
    if not 0.0 < q < 1.0:
        raise ParameterError(f"q must lie in (0, 1), got {q}")
    j = np.arange(1, i + 1, dtype=float)
    alphas = (1.0 - q) / -np.expm1((j + 1.0) * math.log(q))
    return float(bernoulli_sequence_tail(alphas)[-1]) if i >= 1 else 1.0


# ──────────────────────────────────────────────
# Coefficient oracles
# ──────────────────────────────────────────────
def shifted_negative_binomial_h(alpha: float, q: float, n_max: int) -> np.ndarray:
    """h_n = q^(n-1)/n! prod_{k=0}^{n-2} (k - n alpha) for X = 1 + NB(alpha, p)."""
    h = np.zeros(n_max + 1)
    for n in range(1, n_max + 1):
        prod = math.prod(k - n * alpha for k in range(n - 1))
        h[n] = q ** (n - 1) * prod / math.factorial(n)
    return h


def binomial_shifted_h(p: float, size: int, n_max: int) -> np.ndarray:
    """h_n = (-1)^(n-1) (p/q)^(n-1)/n! prod_{k=0}^{n-2} (n(N-1) + k) for X = 1 + Bin(N-1, p)."""
    r = p / (1.0 - p)
    h = np.zeros(n_max + 1)
    for n in range(1, n_max + 1):
        prod = math.prod(n * (size - 1) + k for k in range(n - 1))
        h[n] = (-1) ** (n - 1) * r ** (n - 1) * prod / math.factorial(n)
    return h
