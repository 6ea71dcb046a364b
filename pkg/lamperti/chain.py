"""
chain.py
========
Finite (truncated) Lamperti chains P(i, j) = F(j)^i - F(j-1)^i and their
structural checks, plus the recurrence classification and expected maxima
of the countable chain driven by a branching law nu.

Sections:
  * TransitionMatrix and build_transition
  * stationary vectors (dense solve, GTH elimination, power iteration)
  * Kirchhoff minors, stochastic monotonicity, TP2, time reversal
  * target truncation
  * classification from the limit of i P(nu > i)
  * expected maxima, Foster drift and worst-state statistics

Usage:
  from lamperti.chain import build_transition, stationary_distribution
  chain = build_transition(table)
  pi = stationary_distribution(chain)
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from lamperti.config import (
    CLASSIFY_K_MAX,
    CLASSIFY_K_MIN,
    CLASSIFY_SPREAD_D,
    CLASSIFY_TOL_C,
    CLASSIFY_TOL_D,
    CRITICAL_D,
    E_NEG_GAMMA,
    FINITE_SNAP_TOL,
    KIRCHHOFF_MAX_N,
    MONOTONE_NOISE,
    POWER_ITERATION_CAP,
    POWER_ITERATION_THRESHOLD,
    POWER_ITERATION_TOL,
    ROW_SUM_TOL,
    STATIONARY_RESIDUAL_TOL,
    TP2_TOL,
)
from lamperti.design import DesignTable
from lamperti.errors import ParameterError, RuntimeCapError, ValidationError
from lamperti.laws import DiscreteLaw, PositiveMeasure, Target, dyadic_sum

logger = logging.getLogger(__name__)

MatrixLike = Union["TransitionMatrix", np.ndarray]

VERDICTS = ("PositiveRecurrent", "NullRecurrent", "Transient", "CriticalOpen", "Inconclusive")


# ──────────────────────────────────────────────
# Transition matrix
# ──────────────────────────────────────────────
@dataclass(frozen=True)
class TransitionMatrix:
    """Truncated Lamperti chain on {1..N}; F and tail are indexed 0..N."""

    N: int
    P: np.ndarray = field(repr=False)
    Pc: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    tail: np.ndarray = field(repr=False)
    pi: Optional[np.ndarray] = field(default=None, repr=False)

    def with_pi(self, pi: np.ndarray) -> "TransitionMatrix":
        return replace(self, pi=np.asarray(pi, dtype=float))


def as_matrix(P: MatrixLike) -> np.ndarray:
    M = P.P if isinstance(P, TransitionMatrix) else np.asarray(P, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ParameterError(f"transition matrix must be square, got shape {M.shape}")
    return M


def build_transition(F: Union[DesignTable, Sequence[float]], tail: Optional[Sequence[float]] = None
                     ) -> TransitionMatrix:
    """P(i, j) = F(j)^i - F(j-1)^i for the cdf table F(1..N), F(0) = 0.

    Powers are formed as exp(i log1p(-tail)) and each difference through
    expm1, so entries next to the top state keep their relative accuracy.
    """
    if isinstance(F, DesignTable):
        F, tail = F.F, F.tail
    cdf = np.asarray(F, dtype=float).ravel()
    if cdf.size == 0:
        raise ParameterError("cdf table must be nonempty")
    t = 1.0 - cdf if tail is None else np.asarray(tail, dtype=float).ravel()
    if t.shape != cdf.shape:
        raise ParameterError("cdf and tail tables must have the same length")
    if np.any(np.diff(cdf) < 0) or np.any(cdf < 0):
        raise ParameterError("F must be a nondecreasing table of values in [0, 1]")
    if abs(cdf[-1] - 1.0) > FINITE_SNAP_TOL:
        raise ParameterError(f"F(N) must equal 1, got {cdf[-1]!r}")
    N = cdf.size
    t = np.clip(t, 0.0, 1.0)
    t[-1] = 0.0

    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.log1p(-t)
        a_prev = np.concatenate(([-np.inf], a[:-1]))
        i = np.arange(1, N + 1, dtype=float)[:, None]
        powers = np.exp(i * a[None, :])
        step = -np.expm1(-i * (a - a_prev)[None, :])
        P = np.where(np.isneginf(a)[None, :], 0.0, powers * step)
    P = np.nan_to_num(P, nan=0.0)

    deviation = np.max(np.abs(P.sum(axis=1) - 1.0))
    if deviation > ROW_SUM_TOL:
        raise ValidationError(f"row sums deviate from 1 by {deviation:.3g}")
    Pc = powers
    Pc[:, -1] = 1.0
    logger.debug("built Lamperti matrix N=%d, max row-sum deviation %.3g", N, deviation)
    return TransitionMatrix(N=N, P=P, Pc=Pc, F=np.concatenate(([0.0], cdf)),
                            tail=np.concatenate(([1.0], t)))


# ──────────────────────────────────────────────
# Stationary vectors
# ──────────────────────────────────────────────
def _solve_stationary(P: np.ndarray) -> np.ndarray:
    N = P.shape[0]
    A = np.eye(N) - P.T
    A[-1, :] = 1.0
    b = np.zeros(N)
    b[-1] = 1.0
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise ValidationError("singular stationary system; the chain is reducible") from exc


def gth_solve(P: np.ndarray) -> np.ndarray:
    """Grassmann-Taksar-Heyman elimination; subtraction free, so small entries keep relative accuracy."""
    A = np.array(P, dtype=float)
    n = A.shape[0]
    for i in range(n - 1):
        scale = math.fsum(A[i, i + 1:])
        if scale <= 0.0:
            raise ValidationError(f"GTH reduction stalled at state {i + 1}; the chain is reducible")
        A[i + 1:, i] /= scale
        A[i + 1:, i + 1:] += np.outer(A[i + 1:, i], A[i, i + 1:])
    x = np.zeros(n)
    x[-1] = 1.0
    for i in range(n - 2, -1, -1):
        x[i] = x[i + 1:] @ A[i + 1:, i]
    return x / math.fsum(x)


def _power_stationary(P: np.ndarray) -> np.ndarray:
    x = np.full(P.shape[0], 1.0 / P.shape[0])
    for it in range(POWER_ITERATION_CAP):
        nxt = x @ P
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - x)) <= POWER_ITERATION_TOL:
            logger.debug("power iteration converged after %d steps", it + 1)
            return nxt
        x = nxt
    raise RuntimeCapError(f"power iteration did not reach {POWER_ITERATION_TOL} in {POWER_ITERATION_CAP} steps")


def stationary_distribution(P: MatrixLike, method: Optional[str] = None) -> np.ndarray:
    """pi with pi'P = pi' and sum(pi) = 1.

    method: "solve" (dense solve, one equation replaced by the normalization),
    "gth" or "power"; the default is "solve" up to N = 2000 and power
    iteration above.
    """
    M = as_matrix(P)
    N = M.shape[0]
    if N == 1:
        return np.ones(1)
    if method is None:
        method = "solve" if N <= POWER_ITERATION_THRESHOLD else "power"
    if method == "solve":
        pi = _solve_stationary(M)
    elif method == "gth":
        pi = gth_solve(M)
    elif method == "power":
        pi = _power_stationary(M)
    else:
        raise ParameterError(f"unknown stationary method {method!r}")
    if np.any(pi < -STATIONARY_RESIDUAL_TOL):
        raise ValidationError("stationary vector has negative entries")
    pi = np.clip(pi, 0.0, None)
    pi /= math.fsum(pi)
    residual = np.max(np.abs(pi @ M - pi))
    if N <= 500 and residual > STATIONARY_RESIDUAL_TOL:
        raise ValidationError(f"stationarity residual {residual:.3g} exceeds {STATIONARY_RESIDUAL_TOL}")
    logger.debug("stationary vector by %s, N=%d, residual %.3g", method, N, residual)
    return pi


def kirchhoff_pi(P: MatrixLike, j: int) -> float:
    """det of (I - P) with row and column j removed (j is 1-based)."""
    M = as_matrix(P)
    N = M.shape[0]
    if N > KIRCHHOFF_MAX_N:
        raise ParameterError(f"determinant route is limited to N <= {KIRCHHOFF_MAX_N}, got {N}")
    if not 1 <= j <= N:
        raise ParameterError(f"state {j} outside 1..{N}")
    if N == 1:
        return 1.0
    keep = np.delete(np.arange(N), j - 1)
    A = np.eye(N) - M
    return float(np.linalg.det(A[np.ix_(keep, keep)]))


def kirchhoff_vector(P: MatrixLike) -> np.ndarray:
    """All principal minors of I - P, normalized to sum 1."""
    M = as_matrix(P)
    minors = np.array([kirchhoff_pi(M, j) for j in range(1, M.shape[0] + 1)])
    return minors / minors.sum()


def second_eigenvalue(P: MatrixLike, pi: Optional[np.ndarray] = None) -> float:
    """Modulus of the subdominant eigenvalue, i.e. the spectral radius of P - 1 pi'."""
    M = as_matrix(P)
    N = M.shape[0]
    if N == 1:
        return 0.0
    if N <= POWER_ITERATION_THRESHOLD:
        moduli = np.sort(np.abs(np.linalg.eigvals(M)))[::-1]
        return float(moduli[1])
    if pi is None:
        pi = stationary_distribution(M)
    v = np.cos(np.arange(N, dtype=float))
    v -= v.sum() / N
    estimate = 0.0
    for _ in range(POWER_ITERATION_CAP):
        w = v @ M - (v @ np.ones(N)) * pi
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        new_estimate = norm / np.linalg.norm(v)
        v = w / norm
        if abs(new_estimate - estimate) <= POWER_ITERATION_TOL * max(1.0, new_estimate):
            return float(new_estimate)
        estimate = new_estimate
    raise RuntimeCapError("deflated power iteration did not converge")


# ──────────────────────────────────────────────
# Structural checks
# ──────────────────────────────────────────────
def is_stochastically_monotone(P: MatrixLike, tol: float = TP2_TOL) -> bool:
    """P^c(i, j) nonincreasing in i for every j."""
    Pc = np.cumsum(as_matrix(P), axis=1)
    return bool(np.all(np.diff(Pc, axis=0) <= tol))


def is_tp2(Pc: MatrixLike, tol: float = TP2_TOL) -> bool:
    """P^c(i1, j1) P^c(i2, j2) >= P^c(i1, j2) P^c(i2, j1) - tol for i1 < i2, j1 < j2.

    A strictly positive matrix is TP2 iff its adjacent 2x2 minors are
    nonnegative, which is the O(N^2) path; otherwise every pair is checked.
    """
    C = Pc.Pc if isinstance(Pc, TransitionMatrix) else np.asarray(Pc, dtype=float)
    n_rows, n_cols = C.shape
    if n_rows < 2 or n_cols < 2:
        return True
    if np.all(C > 0):
        minors = C[:-1, :-1] * C[1:, 1:] - C[:-1, 1:] * C[1:, :-1]
        return bool(np.all(minors >= -tol))
    upper = np.triu(np.ones((n_cols, n_cols), dtype=bool), k=1)
    for i1 in range(n_rows - 1):
        a = C[i1]
        B = C[i1 + 1:]
        gap = a[None, :, None] * B[:, None, :] - a[None, None, :] * B[:, :, None]
        if np.any(gap[:, upper] < -tol):
            return False
    return True


def time_reverse(P: MatrixLike, pi: Sequence[float]) -> np.ndarray:
    """D_pi^-1 P' D_pi, the chain run backwards in stationarity."""
    M = as_matrix(P)
    p = np.asarray(pi, dtype=float).ravel()
    if p.shape[0] != M.shape[0] or np.any(p <= 0):
        raise ParameterError("pi must be a strictly positive vector matching P")
    residual = np.max(np.abs(p @ M - p))
    if residual > STATIONARY_RESIDUAL_TOL:
        raise ValidationError(f"pi is not stationary for P (residual {residual:.3g})")
    return M.T * p[None, :] / p[:, None]


def truncate_target(target: Target, N: int, mode: str = "renormalize") -> np.ndarray:
    """Probability vector on {1..N}: renormalized restriction or tail lumped at N."""
    if N < 1:
        raise ParameterError(f"N must be >= 1, got {N}")
    if mode not in ("renormalize", "lump"):
        raise ParameterError(f"truncation mode must be renormalize or lump, got {mode!r}")
    j = np.arange(1, N + 1, dtype=float)
    if isinstance(target, PositiveMeasure):
        w = np.atleast_1d(target.delta(j))
        if mode == "lump":
            if not target.summable:
                raise ParameterError(f"measure {target.label!r} has infinite mass; lump mode is undefined")
            w[-1] = target.pgf(1.0) - math.fsum(w[:-1])
    else:
        w = np.atleast_1d(target.pmf(j))
        if mode == "lump":
            w[-1] = float(target.tail(N - 1.0))
    total = math.fsum(w)
    if not total > 0:
        raise ParameterError("target has zero mass on {1..N}")
    return w / total


# ──────────────────────────────────────────────
# Failure rate
# ──────────────────────────────────────────────
def failure_rate(law: DiscreteLaw, j_max: int) -> np.ndarray:
    """P(X = j) / P(X >= j) for j = 1..j_max (nan once the tail is exhausted)."""
    j = np.arange(1, j_max + 1, dtype=float)
    survivors = np.atleast_1d(law.tail(j - 1.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(survivors > 0, np.atleast_1d(law.pmf(j)) / survivors, np.nan)


def is_dfr(law: DiscreteLaw, j_max: int, tol: float = TP2_TOL) -> bool:
    rates = failure_rate(law, j_max)
    rates = rates[np.isfinite(rates)]
    return bool(np.all(np.diff(rates) <= tol * np.maximum(1.0, rates[:-1])))


# ──────────────────────────────────────────────
# Classification
# ──────────────────────────────────────────────
@dataclass(frozen=True)
class Classification:
    verdict: str
    limit_estimate: float
    d_estimate: Optional[float]
    margin: float
    i_values: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    a_values: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "limit_estimate": self.limit_estimate,
                "d_estimate": self.d_estimate, "margin": self.margin,
                "c": E_NEG_GAMMA, "critical_d": CRITICAL_D}


def _intercept(h: np.ndarray, y: np.ndarray, degree: int) -> float:
    return float(np.polynomial.polynomial.polyfit(h, y, degree)[0])


def _d_verdict(d: float) -> str:
    lo, hi = 1.0 - CLASSIFY_TOL_D, 1.0 + CLASSIFY_TOL_D
    if d < -CRITICAL_D * hi:
        return "PositiveRecurrent"
    if d <= -CRITICAL_D * lo:
        return "Inconclusive"
    if d < CRITICAL_D * lo:
        return "NullRecurrent"
    if d <= CRITICAL_D * hi:
        return "CriticalOpen"
    return "Transient"


def classify(nu: DiscreteLaw, k_min: int = CLASSIFY_K_MIN, k_max: int = CLASSIFY_K_MAX) -> Classification:
    """Recurrence verdict from L = lim i P(nu > i), then from d when L is e^-gamma.

    L is the h -> 0 intercept of a cubic least-squares fit of i P(nu > i)
    against h = 1/log i over i = 2^k; the stability spread compares it with
    a quadratic fit on the upper half of the grid.
    """
    if nu.is_finite:
        raise ParameterError("classification needs a countable branching law")
    k = np.arange(k_min, k_max + 1, dtype=float)
    i = np.exp2(k)
    tails = np.atleast_1d(nu.tail(i))
    if not np.all(np.isfinite(tails)):
        raise ValidationError(f"tail evaluator of {nu.label!r} returned non-finite values")
    a = i * tails
    h = 1.0 / np.log(i)
    c = E_NEG_GAMMA

    last = a[-11:]
    if np.all(np.diff(last) > 0) and last[-1] > 1.5 * last[0]:
        logger.info("classify(%s): i P(nu > i) grows without bound", nu.label)
        return Classification("Transient", math.inf, None, math.inf, i, a)

    L = _intercept(h, a, 3)
    upper = k >= (k_min + k_max) / 2
    spread = abs(L - _intercept(h[upper], a[upper], 2))
    gap = abs(L - c)
    logger.debug("classify(%s): L=%.12g spread=%.3g", nu.label, L, spread)
    if gap > CLASSIFY_TOL_C * c:
        if spread >= gap:
            return Classification("Inconclusive", L, None, gap - spread, i, a)
        verdict = "PositiveRecurrent" if L < c else "Transient"
        return Classification(verdict, L, None, gap, i, a)

    b = (a - c) * np.log(i)
    d = _intercept(h, b, 2)
    d_spread = abs(d - _intercept(h[upper], b[upper], 1))
    margin = min(abs(abs(d) - CRITICAL_D), abs(d))
    logger.debug("classify(%s): d=%.12g spread=%.3g", nu.label, d, d_spread)
    if d_spread > CLASSIFY_SPREAD_D * CRITICAL_D:
        return Classification("Inconclusive", L, d, margin, i, a)
    return Classification(_d_verdict(d), L, d, margin, i, a)


# ──────────────────────────────────────────────
# Expected maxima and excursions
# ──────────────────────────────────────────────
def expected_max(nu: DiscreteLaw, i: int) -> float:
    """E(max of i copies of nu) = sum_{j >= 0} (1 - F(j)^i); inf when not summable."""
    if i < 1:
        raise ParameterError(f"i must be >= 1, got {i}")

    def term(j):
        return -np.expm1(i * np.log1p(-np.atleast_1d(nu.tail(j))))

    stop = nu.N if nu.is_finite else None
    return dyadic_sum(term, start=0, stop=stop, regime=lambda j: i * float(nu.tail(j)) < 0.1)


def foster_drift_threshold(nu: DiscreteLaw, i_max: int = 1 << 12) -> Optional[int]:
    """Smallest sampled I with E(m_i) <= i - 1 for every sampled i in [I, i_max]."""
    if i_max < 1:
        raise ParameterError(f"i_max must be >= 1, got {i_max}")
    grid = np.arange(1, min(64, i_max) + 1)
    if i_max > 64:
        grid = np.union1d(grid, np.unique(np.geomspace(64, i_max, 32).astype(np.int64)))
    drift_ok = np.array([expected_max(nu, int(i)) <= i - 1 for i in grid])
    if not drift_ok[-1]:
        return None
    bad = np.flatnonzero(~drift_ok)
    return int(grid[0]) if bad.size == 0 else int(grid[bad[-1] + 1])


@dataclass(frozen=True)
class WorstStateStats:
    mean_return: float
    mean_positive_excursion: float
    occupation_rho: float


def worst_state_stats(P: MatrixLike, pi: Sequence[float]) -> WorstStateStats:
    """Return and excursion times of state 1 and the time spent there entering from above."""
    M = as_matrix(P)
    p = np.asarray(pi, dtype=float)
    if not p[0] > 0:
        raise ParameterError("pi(1) must be positive")
    F1 = float(M[0, 0])
    mean_return = 1.0 / p[0]
    excursion = math.nan if F1 >= 1.0 else (mean_return - F1) / (1.0 - F1)
    if not math.isnan(excursion) and excursion <= 2.0 - MONOTONE_NOISE:
        raise ValidationError(f"mean positive excursion {excursion!r} does not exceed 2")
    return WorstStateStats(mean_return=mean_return, mean_positive_excursion=excursion,
                           occupation_rho=F1 * p[0])
