"""
hitting.py
==========
Hitting times of the top state N for the truncated Lamperti chain.

Covers the strong stationary time T_(N) and its separation distance, the
excursion time W1 from N back to N, absorption times tau_{pi0,N} through
the substochastic block Q = P restricted to {1..N-1}, the quasi-stationary
triple (mu, rho, phi), the geometric-convolution identities checked at real
pgf arguments, and the exponential-approximation bounds for tau.

Vectors are indexed by state - 1 throughout. Every sequence is produced by
repeated vector-matrix products, never by matrix powers.

Usage:
  from lamperti.hitting import hitting_report
  report = hitting_report(chain, pi0)
  report.to_frame().to_csv("hitting.csv", index=False)
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg

from lamperti.chain import (
    MatrixLike,
    as_matrix,
    build_transition,
    second_eigenvalue,
    stationary_distribution,
    time_reverse,
    truncate_target,
)
from lamperti.config import (
    EXP_BOUND_GRID,
    EXP_BOUND_RTOL,
    EXP_BOUND_TAIL_TOL,
    GREEN_KERNEL_TOL,
    HITTING_N_CAP,
    MONOTONE_TOL,
    QSD_ITER_CAP,
    QSD_TOL,
    SEP_HORIZON_TOL,
    SEPARATION_TOL,
)
from lamperti.design import design_branching_finite
from lamperti.errors import ParameterError, RuntimeCapError, ValidationError
from lamperti.laws import DiscreteLaw

logger = logging.getLogger(__name__)


def _stationary(M: np.ndarray, pi: Optional[Sequence[float]]) -> np.ndarray:
    if pi is None:
        return stationary_distribution(M, method="gth")
    p = np.asarray(pi, dtype=float).ravel()
    if p.shape[0] != M.shape[0]:
        raise ParameterError("pi must have one entry per state")
    return p


def _start(M: np.ndarray, init: Sequence[float]) -> np.ndarray:
    v = np.asarray(init, dtype=float).ravel()
    if v.shape[0] != M.shape[0] or np.any(v < 0):
        raise ParameterError("initial vector must be nonnegative with one entry per state")
    if abs(math.fsum(v) - 1.0) > 1e-10:
        raise ParameterError(f"initial vector must sum to 1, got {math.fsum(v)!r}")
    return v


def _complain(message: str, forced: bool, diagnostics: Optional[List[str]]) -> None:
    if not forced:
        raise ValidationError(message)
    logger.warning("forced: %s", message)
    if diagnostics is not None:
        diagnostics.append(message)


# ──────────────────────────────────────────────
# Initial vectors
# ──────────────────────────────────────────────
def delta_start(N: int, state: int = 1) -> np.ndarray:
    v = np.zeros(N)
    v[state - 1] = 1.0
    return v


def tilted_start(pi: Sequence[float], z: float) -> np.ndarray:
    """pi0(i) proportional to z^i pi(i) on {1..N-1}, pi0(N) = 0."""
    if not 0.0 < z < 1.0:
        raise ParameterError(f"tilt z must lie in (0, 1), got {z}")
    p = np.asarray(pi, dtype=float)
    w = p * np.power(z, np.arange(1, p.size + 1, dtype=float))
    w[-1] = 0.0
    return w / w.sum()


def initial_vector(spec: str, pi: Sequence[float]) -> np.ndarray:
    """Parse "delta1", "delta<k>", "tilt:<z>", "pi" or "restricted" into a start vector."""
    p = np.asarray(pi, dtype=float)
    N = p.size
    if spec == "pi":
        return p.copy()
    if spec == "restricted":
        w = p.copy()
        w[-1] = 0.0
        return w / w.sum()
    if spec.startswith("tilt:"):
        return tilted_start(p, float(spec.split(":", 1)[1]))
    if spec.startswith("delta"):
        state = int(spec[len("delta"):] or 1)
        if not 1 <= state <= N:
            raise ParameterError(f"start state {state} outside 1..{N}")
        return delta_start(N, state)
    raise ParameterError(f"unknown initial vector {spec!r}; use delta<k>, tilt:<z>, pi or restricted")


# ──────────────────────────────────────────────
# Brown condition, T_(N) and separation
# ──────────────────────────────────────────────
def check_brown_condition(pi0: Sequence[float], piN: Sequence[float]) -> bool:
    """pi0(i)/pi(i) nonincreasing in i and pi0(N) = 0."""
    a = np.asarray(pi0, dtype=float)
    b = np.asarray(piN, dtype=float)
    if a.shape != b.shape or np.any(b <= 0):
        raise ParameterError("pi0 and pi must have equal length and pi must be positive")
    if a[-1] != 0.0:
        return False
    ratio = a / b
    return bool(np.all(np.diff(ratio) <= MONOTONE_TOL * np.maximum(1.0, ratio[:-1])))


def _guard_brown(pi0: np.ndarray, pi: np.ndarray, forced: bool, diagnostics: Optional[List[str]]) -> None:
    if not check_brown_condition(pi0, pi):
        _complain("initial vector violates the Brown condition (pi0/pi nonincreasing, pi0(N) = 0)",
                  forced, diagnostics)


def _horizon_cdf(M: np.ndarray, v: np.ndarray, pi_N: float, n_max: Optional[int]) -> np.ndarray:
    values = [v[-1] / pi_N]
    if n_max is None:
        while 1.0 - values[-1] >= SEP_HORIZON_TOL:
            if len(values) > HITTING_N_CAP:
                logger.warning("separation still %.3g at the step cap %d", 1.0 - values[-1], HITTING_N_CAP)
                break
            v = v @ M
            values.append(v[-1] / pi_N)
    else:
        for _ in range(n_max):
            v = v @ M
            values.append(v[-1] / pi_N)
    return np.array(values)


def strong_stationary_time_cdf(P: MatrixLike, pi0: Sequence[float], n_max: Optional[int] = None,
                               pi: Optional[Sequence[float]] = None, forced: bool = False,
                               diagnostics: Optional[List[str]] = None) -> np.ndarray:
    """P(T_(N) <= n) = pi0'P^n e_N / pi(N) for n = 0..n_max.

    Without n_max the horizon is the first n with separation below 1e-10.
    """
    M = as_matrix(P)
    p = _stationary(M, pi)
    v = _start(M, pi0)
    _guard_brown(v, p, forced, diagnostics)
    cdf = _horizon_cdf(M, v, p[-1], n_max)
    if np.any(np.diff(cdf) < -MONOTONE_TOL) or cdf[-1] > 1.0 + MONOTONE_TOL:
        _complain("P(T_(N) <= n) is not a nondecreasing sequence in [0, 1]", forced, diagnostics)
    return cdf


def separation_distance(P: MatrixLike, pi0: Sequence[float], n: int,
                        pi: Optional[Sequence[float]] = None, forced: bool = False) -> float:
    """max_k (1 - pi0'P^n e_k / pi(k)), checked against the state-N form."""
    M = as_matrix(P)
    p = _stationary(M, pi)
    v = _start(M, pi0)
    for _ in range(n):
        v = v @ M
    worst = float(np.max(1.0 - v / p))
    at_top = float(1.0 - v[-1] / p[-1])
    if abs(worst - at_top) > SEPARATION_TOL:
        _complain(f"separation is not attained at state N (gap {abs(worst - at_top):.3g})", forced, None)
    return worst


# ──────────────────────────────────────────────
# W1 and absorption times
# ──────────────────────────────────────────────
def _top_return_sequence(M: np.ndarray, n_max: int) -> np.ndarray:
    """P^n(N, N) for n = 0..n_max."""
    v = np.zeros(M.shape[0])
    v[-1] = 1.0
    out = np.empty(n_max + 1)
    out[0] = 1.0
    for n in range(1, n_max + 1):
        v = v @ M
        out[n] = v[-1]
    return out


def w1_tail_sequence(P: MatrixLike, piN_N: float, n_max: int, forced: bool = False,
                     diagnostics: Optional[List[str]] = None) -> np.ndarray:
    """P(W1 > n) = (P^n(N,N) - pi(N)) / (1 - pi(N)) for n = 0..n_max."""
    if not 0.0 < piN_N < 1.0:
        raise ParameterError(f"pi(N) must lie in (0, 1), got {piN_N}")
    returns = _top_return_sequence(as_matrix(P), n_max)
    if np.any(np.diff(returns) > MONOTONE_TOL):
        _complain("P^n(N, N) is not nonincreasing in n", forced, diagnostics)
    return (returns - piN_N) / (1.0 - piN_N)


def w1_tail(P: MatrixLike, piN_N: float, n: int, forced: bool = False) -> float:
    return float(w1_tail_sequence(P, piN_N, n, forced)[-1])


def _absorbing_block(M: np.ndarray) -> np.ndarray:
    return M[:-1, :-1]


def hitting_tail_sequence(P: MatrixLike, init: Sequence[float], n_max: int) -> np.ndarray:
    """P(tau_{init,N} > n) = init_0' Q^n 1 for n = 0..n_max, with tau_{N,N} = 0."""
    M = as_matrix(P)
    v = _start(M, init)[:-1]
    Q = _absorbing_block(M)
    out = np.empty(n_max + 1)
    out[0] = v.sum()
    for n in range(1, n_max + 1):
        v = v @ Q
        out[n] = v.sum()
    return out


def hitting_tail(P: MatrixLike, init: Sequence[float], n: int) -> float:
    return float(hitting_tail_sequence(P, init, n)[-1])


def _fundamental_solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    A = np.eye(M.shape[0] - 1) - _absorbing_block(M)
    try:
        return np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise ValidationError("I - Q is singular; the chain cannot reach state N") from exc


def hitting_mean(P: MatrixLike, init: Sequence[float]) -> float:
    """E(tau_{init,N}) = init_0'(I - Q)^-1 1."""
    M = as_matrix(P)
    v = _start(M, init)
    if M.shape[0] == 1:
        return 0.0
    return float(v[:-1] @ _fundamental_solve(M, np.ones(M.shape[0] - 1)))


def hitting_second_moment(P: MatrixLike, init: Sequence[float]) -> float:
    """E(tau^2) = 2 u'(I - Q)^-2 1 - u'(I - Q)^-1 1."""
    M = as_matrix(P)
    v = _start(M, init)
    if M.shape[0] == 1:
        return 0.0
    m1 = _fundamental_solve(M, np.ones(M.shape[0] - 1))
    m2 = _fundamental_solve(M, m1)
    return float(2.0 * v[:-1] @ m2 - v[:-1] @ m1)


def hitting_pgf(P: MatrixLike, init: Sequence[float], z: float) -> float:
    """E(z^tau_{init,N}) = 1 - (1 - z) init_0'(I - zQ)^-1 1."""
    M = as_matrix(P)
    v = _start(M, init)
    if M.shape[0] == 1:
        return 1.0
    A = np.eye(M.shape[0] - 1) - z * _absorbing_block(M)
    return float(1.0 - (1.0 - z) * v[:-1] @ np.linalg.solve(A, np.ones(M.shape[0] - 1)))


# ──────────────────────────────────────────────
# Quasi-stationary distribution
# ──────────────────────────────────────────────
@dataclass(frozen=True)
class QSD:
    mu: np.ndarray
    rho: float
    phi: np.ndarray


def _left_power(Q: np.ndarray) -> Tuple[np.ndarray, float, bool]:
    mu = np.full(Q.shape[0], 1.0 / Q.shape[0])
    rho = 0.0
    for _ in range(QSD_ITER_CAP):
        nxt = mu @ Q
        rho = nxt.sum()
        nxt /= rho
        if np.max(np.abs(nxt @ Q - rho * nxt)) <= QSD_TOL:
            return nxt, rho, True
        mu = nxt
    return mu, rho, False


def _inverse_iteration(A: np.ndarray, shift: float, start: np.ndarray) -> Tuple[np.ndarray, bool]:
    lu = linalg.lu_factor(A - shift * np.eye(A.shape[0]))
    x = start / np.linalg.norm(start)
    for _ in range(100):
        x = linalg.lu_solve(lu, x)
        x /= np.linalg.norm(x)
        rayleigh = x @ A @ x
        if np.max(np.abs(A @ x - rayleigh * x)) <= QSD_TOL:
            return x, True
    return x, False


def qsd(P: MatrixLike) -> QSD:
    """Left and right Perron vectors of Q with |mu| = 1 and mu'phi = 1."""
    M = as_matrix(P)
    N = M.shape[0]
    if N < 2:
        raise ParameterError("the quasi-stationary distribution needs N >= 2")
    Q = _absorbing_block(M)
    if N == 2:
        return QSD(mu=np.ones(1), rho=float(Q[0, 0]), phi=np.ones(1))

    mu, rho, ok = _left_power(Q)
    phi, _, ok_right = _left_power(Q.T)
    if not (ok and ok_right):
        logger.debug("qsd: power iteration stalled at rho=%.15g, switching to shifted inverse iteration", rho)
        shift = rho * (1.0 + 1e-9)
        mu, ok = _inverse_iteration(Q.T, shift, mu)
        phi, ok_right = _inverse_iteration(Q, shift, phi)
        if not (ok and ok_right):
            raise RuntimeCapError("quasi-stationary iteration did not converge; the spectrum is near-degenerate")
        mu = np.abs(mu)
        phi = np.abs(phi)
    mu = mu / mu.sum()
    phi = phi / (mu @ phi)
    rho = float(mu @ Q @ phi)

    through_top = float(mu @ (1.0 - M[:-1, -1]))
    if abs(rho - through_top) > 1e-10:
        raise ValidationError(f"rho={rho!r} disagrees with sum_j mu(j) F(N-1)^j = {through_top!r}")
    return QSD(mu=mu, rho=rho, phi=phi)


def tail_ratio_sequence(P: MatrixLike, pi0: Sequence[float], n_max: int,
                        pi: Optional[Sequence[float]] = None) -> np.ndarray:
    """u_n = P(tau_{pi0,N} > n) / P(tau_{pi,N} > n)."""
    M = as_matrix(P)
    p = _stationary(M, pi)
    return hitting_tail_sequence(M, pi0, n_max) / hitting_tail_sequence(M, p, n_max)


def tail_ratio_limit(P: MatrixLike, pi0: Sequence[float], pi: Optional[Sequence[float]] = None,
                     forced: bool = False, diagnostics: Optional[List[str]] = None,
                     triple: Optional[QSD] = None) -> float:
    """lim u_n = pi0_0'phi / pi_0'phi (both vectors restricted to {1..N-1}, not renormalized)."""
    M = as_matrix(P)
    p = _stationary(M, pi)
    v = _start(M, pi0)
    _guard_brown(v, p, forced, diagnostics)
    triple = triple or qsd(M)
    if np.any(np.diff(triple.phi) > MONOTONE_TOL * np.max(triple.phi)):
        _complain("phi is not nonincreasing in the state index", forced, diagnostics)
    limit = float((v[:-1] @ triple.phi) / (p[:-1] @ triple.phi))
    if limit < 1.0 - 1e-12:
        _complain(f"tail-ratio limit {limit!r} is below 1", forced, diagnostics)
    return limit


# ──────────────────────────────────────────────
# Green kernel and pgf identities
# ──────────────────────────────────────────────
def _excess_returns(M: np.ndarray, pi_N: float) -> np.ndarray:
    """d_n = P^n(N,N) - pi(N), computed until d_n < GREEN_KERNEL_TOL."""
    v = np.zeros(M.shape[0])
    v[-1] = 1.0
    out = [1.0 - pi_N]
    while out[-1] >= GREEN_KERNEL_TOL * pi_N:
        if len(out) > HITTING_N_CAP:
            raise RuntimeCapError(f"P^n(N,N) did not settle within {HITTING_N_CAP} steps")
        v = v @ M
        out.append(v[-1] - pi_N)
    return np.array(out)


def green_kernel_excess(excess: np.ndarray, z: float) -> Tuple[float, float]:
    """sum_n z^n d_n and a bound on the truncated remainder (d_n is nonincreasing)."""
    if not 0.0 <= z < 1.0:
        raise ParameterError(f"z must lie in [0, 1), got {z}")
    powers = np.power(z, np.arange(excess.size, dtype=float))
    value = math.fsum(powers * excess)
    bound = excess[-1] * z ** excess.size / (1.0 - z)
    return value, bound


@dataclass(frozen=True)
class ConvolutionCheck:
    z: np.ndarray
    via_green: np.ndarray
    via_convolution: np.ndarray
    via_resolvent: np.ndarray
    truncation_bound: np.ndarray
    max_residual: float
    factorization_residual: Optional[float] = None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"z": self.z, "green": self.via_green, "convolution": self.via_convolution,
                             "resolvent": self.via_resolvent, "truncation_bound": self.truncation_bound})


def geometric_convolution_check(P: MatrixLike, pi: Optional[Sequence[float]] = None,
                                z_grid: Optional[Sequence[float]] = None,
                                pi0: Optional[Sequence[float]] = None) -> ConvolutionCheck:
    """Compare E(z^tau_{pi,N}) from the Green kernel, the W1 convolution and the resolvent.

    With pi0 given, also the factorization E(z^tau_{pi0,N}) = E(z^T) E(z^tau_{pi,N}).
    """
    M = as_matrix(P)
    p = _stationary(M, pi)
    pi_N = float(p[-1])
    z = np.asarray(np.arange(1, 10) / 10.0 if z_grid is None else z_grid, dtype=float)
    excess = _excess_returns(M, pi_N)

    green, conv, resolvent, bounds = [], [], [], []
    for zv in z:
        D, bound = green_kernel_excess(excess, float(zv))
        G = pi_N / (1.0 - zv) + D
        green.append(pi_N / ((1.0 - zv) * G))
        w_pgf = 1.0 - (1.0 - zv) * D / (1.0 - pi_N)
        conv.append(pi_N / (1.0 - (1.0 - pi_N) * w_pgf))
        resolvent.append(hitting_pgf(M, p, float(zv)))
        bounds.append(bound)
        if bound > 1e-9:
            logger.warning("Green kernel truncation at z=%.3g only certified to %.3g", zv, bound)
    green, conv, resolvent = np.array(green), np.array(conv), np.array(resolvent)
    residual = float(max(np.max(np.abs(green - conv)), np.max(np.abs(green - resolvent))))

    factorization = None
    if pi0 is not None:
        start = _start(M, pi0)
        sep = 1.0 - _horizon_cdf(M, start, pi_N, None)
        sep = np.maximum(sep, 0.0)
        gaps = []
        for zv, tau_pgf in zip(z, resolvent):
            powers = np.power(zv, np.arange(sep.size, dtype=float))
            T_pgf = 1.0 - (1.0 - zv) * math.fsum(powers * sep)
            gaps.append(abs(hitting_pgf(M, start, float(zv)) - T_pgf * tau_pgf))
        factorization = float(max(gaps))
    return ConvolutionCheck(z=z, via_green=green, via_convolution=conv, via_resolvent=resolvent,
                            truncation_bound=np.array(bounds), max_residual=residual,
                            factorization_residual=factorization)


# ──────────────────────────────────────────────
# Moments of T_(N) and W1
# ──────────────────────────────────────────────
def _fundamental_matrix(M: np.ndarray, p: np.ndarray) -> np.ndarray:
    N = M.shape[0]
    return np.linalg.inv(np.eye(N) - M + np.outer(np.ones(N), p))


@dataclass(frozen=True)
class StrongStationaryMean:
    by_definition: float
    by_fundamental_matrix: float
    by_convolution: float
    horizon: int

    @property
    def value(self) -> float:
        return self.by_definition


def mean_strong_stationary_time(P: MatrixLike, pi0: Sequence[float], pi: Optional[Sequence[float]] = None,
                                forced: bool = False) -> StrongStationaryMean:
    """E(T_(N)) three ways: sum of P(T > n), the fundamental matrix and E(tau_pi0) - E(tau_pi)."""
    M = as_matrix(P)
    p = _stationary(M, pi)
    v = _start(M, pi0)
    sep = 1.0 - strong_stationary_time_cdf(M, v, pi=p, forced=forced)
    Z = _fundamental_matrix(M, p)
    fundamental = float((p[-1] - v @ Z[:, -1]) / p[-1])
    convolution = hitting_mean(M, v) - hitting_mean(M, p)
    return StrongStationaryMean(by_definition=math.fsum(sep), by_fundamental_matrix=fundamental,
                                by_convolution=convolution, horizon=sep.size - 1)


def w1_moments(P: MatrixLike, pi: Optional[Sequence[float]] = None) -> Tuple[float, float]:
    """E(W1) = (Z - Pi)_NN / (1 - pi(N)) and E(W1^2) = (2 (D Z^2)_NN + (Z - Pi)_NN) / (1 - pi(N))."""
    M = as_matrix(P)
    p = _stationary(M, pi)
    Z = _fundamental_matrix(M, p)
    Pi = np.outer(np.ones(M.shape[0]), p)
    D = M - Pi
    first = (Z - Pi)[-1, -1]
    second = (D @ Z @ Z)[-1, -1]
    return float(first / (1.0 - p[-1])), float((2.0 * second + first) / (1.0 - p[-1]))


def _lattice_gap(absorbed: float, n: float, mean: float) -> float:
    # P(tau > n) - e^{-x} = -expm1(-x) - P(tau <= n), both sides small near t = 0
    return max(abs(-math.expm1(-n / mean) - absorbed), abs(-math.expm1(-(n + 1.0) / mean) - absorbed))


def _observed_sup(M: np.ndarray, init: np.ndarray, mean: float) -> float:
    """sup_t |P(tau/mean > t) - e^-t| on the lattice up to the step cap, then on a time grid.

    P(tau <= n) is read off the absorbed mass of the chain stopped at N, a sum of
    nonnegative products, so the gap keeps relative accuracy when the tail is close to 1.
    At n = 0 the gap is exactly init(N).
    """
    if not mean > 0.0:
        # tau = 0 almost surely
        return 1.0
    A = M.copy()
    A[-1] = 0.0
    A[-1, -1] = 1.0
    v = init.copy()
    sup, n = _lattice_gap(v[-1], 0, mean), 0
    while 1.0 - v[-1] >= EXP_BOUND_TAIL_TOL and n < HITTING_N_CAP:
        v = v @ A
        n += 1
        sup = max(sup, _lattice_gap(v[-1], n, mean))
    horizon = mean * math.log(10.0 / EXP_BOUND_TAIL_TOL)
    if 1.0 - v[-1] < EXP_BOUND_TAIL_TOL or horizon <= n:
        return sup
    logger.debug("exponential gap: lattice stopped at %d steps, sampling %d times up to %.3g",
                 n, EXP_BOUND_GRID, horizon)
    grid = np.unique(np.linspace(n, horizon, EXP_BOUND_GRID).astype(np.int64))
    powers = [A]
    while (1 << len(powers)) <= int(grid[-1]):
        powers.append(powers[-1] @ powers[-1])
    for k in grid:
        w = init
        for bit, Ab in enumerate(powers):
            if (int(k) >> bit) & 1:
                w = w @ Ab
        sup = max(sup, _lattice_gap(w[-1], float(k), mean))
    return sup


@dataclass(frozen=True)
class ExponentialBound:
    bound_piN: float
    bound_pi0: float
    observed_sup_piN: float
    observed_sup_pi0: float
    bound_piN_moment_form: float


def exponential_bound(P: MatrixLike, pi0: Sequence[float], pi: Optional[Sequence[float]] = None,
                      forced: bool = False, diagnostics: Optional[List[str]] = None) -> ExponentialBound:
    """Sup-norm bounds between P(tau/E(tau) > t) and e^-t, with the observed distances."""
    M = as_matrix(P)
    p = _stationary(M, pi)
    v = _start(M, pi0)
    pi_N = float(p[-1])
    EW, EW2 = w1_moments(M, p)
    bound_piN = pi_N * EW2 / EW ** 2
    mean_pi = hitting_mean(M, p)
    second_pi = hitting_second_moment(M, p)
    moment_form = 2.0 * (1.0 - pi_N) * (second_pi / (2.0 * mean_pi ** 2) - 1.0)
    if abs(moment_form - bound_piN) > 1e-10 * max(1.0, bound_piN):
        raise ValidationError(f"the two forms of the pi-start bound disagree: {bound_piN!r} vs {moment_form!r}")

    mean_T = mean_strong_stationary_time(M, v, p, forced=forced).value
    bound_pi0 = mean_T / mean_pi + bound_piN
    observed_piN = _observed_sup(M, p, mean_pi)
    observed_pi0 = _observed_sup(M, v, hitting_mean(M, v))
    if observed_piN > bound_piN * (1.0 + EXP_BOUND_RTOL) or observed_pi0 > bound_pi0 * (1.0 + EXP_BOUND_RTOL):
        _complain("observed exponential-approximation distance exceeds its bound", forced, diagnostics)
    return ExponentialBound(bound_piN=bound_piN, bound_pi0=bound_pi0, observed_sup_piN=observed_piN,
                            observed_sup_pi0=observed_pi0, bound_piN_moment_form=moment_form)


# ──────────────────────────────────────────────
# Truncation limit
# ──────────────────────────────────────────────
def siegmund_pollack_gap(target: DiscreteLaw, N_list: Sequence[int], strict: bool = True) -> np.ndarray:
    """||mu_(N-1) - pi_(N-1)||_inf for each truncation level in N_list."""
    gaps = []
    for N in N_list:
        if N < 2:
            raise ParameterError(f"truncation levels must be >= 2, got {N}")
        chain = build_transition(design_branching_finite(truncate_target(target, N)))
        restricted = truncate_target(target, N - 1)
        gaps.append(float(np.max(np.abs(qsd(chain).mu - restricted))))
        logger.debug("siegmund_pollack_gap(%s): N=%d gap=%.3g", target.label, N, gaps[-1])
    gaps = np.array(gaps)
    if strict and np.any(np.diff(gaps) >= 0):
        raise ValidationError(f"quasi-stationary gaps are not strictly decreasing: {gaps.tolist()}")
    return gaps


# ──────────────────────────────────────────────
# Report
# ──────────────────────────────────────────────
@dataclass(frozen=True)
class HittingReport:
    N: int
    T_cdf: np.ndarray = field(repr=False)
    sep: np.ndarray = field(repr=False)
    W1_tail: np.ndarray = field(repr=False)
    tau_tail_pi0: np.ndarray = field(repr=False)
    tau_tail_piN: np.ndarray = field(repr=False)
    mean_T: float
    mean_tau_pi0: float
    mean_tau_piN: float
    second_moment_tau_piN: float
    qsd_mu: np.ndarray = field(repr=False)
    rho_N: float
    qsd_phi: np.ndarray = field(repr=False)
    u_limit: float
    exp_bound_piN: float
    exp_bound_pi0: float
    observed_sup_piN: float
    observed_sup_pi0: float
    lambda_2: float
    convolution_residual: float
    factorization_residual: float
    time_reversed: bool = False
    diagnostics: Tuple[str, ...] = ()

    def to_frame(self) -> pd.DataFrame:
        """Sequences as columns over n = 0..n_max (T_cdf horizon)."""
        n = np.arange(self.T_cdf.size)
        return pd.DataFrame({
            "n": n,
            "T_cdf": self.T_cdf,
            "sep": self.sep,
            "W1_tail": self.W1_tail,
            "tau_tail_pi0": self.tau_tail_pi0,
            "tau_tail_piN": self.tau_tail_piN,
        })

    def qsd_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"state": np.arange(1, self.N), "mu": self.qsd_mu, "phi": self.qsd_phi})

    def scalars(self) -> dict:
        return {
            "N": self.N,
            "mean_T": self.mean_T,
            "mean_tau_pi0": self.mean_tau_pi0,
            "mean_tau_piN": self.mean_tau_piN,
            "second_moment_tau_piN": self.second_moment_tau_piN,
            "rho_N": self.rho_N,
            "u_limit": self.u_limit,
            "exp_bound_piN": self.exp_bound_piN,
            "exp_bound_pi0": self.exp_bound_pi0,
            "observed_sup_piN": self.observed_sup_piN,
            "observed_sup_pi0": self.observed_sup_pi0,
            "lambda_2": self.lambda_2,
            "convolution_residual": self.convolution_residual,
            "factorization_residual": self.factorization_residual,
            "time_reversed": self.time_reversed,
            "diagnostics": list(self.diagnostics),
        }


def hitting_report(P: MatrixLike, pi0: Sequence[float], pi: Optional[Sequence[float]] = None,
                   n_max: Optional[int] = None, forced: bool = False,
                   time_reversed: bool = False) -> HittingReport:
    """Every sequence and scalar of the module for one chain and start vector."""
    M = as_matrix(P)
    N = M.shape[0]
    if N < 2:
        raise ParameterError("hitting analysis needs N >= 2")
    p = _stationary(M, pi)
    if time_reversed:
        M = time_reverse(M, p)
    v = _start(M, pi0)
    diagnostics: List[str] = []

    T_cdf = strong_stationary_time_cdf(M, v, n_max=n_max, pi=p, forced=forced, diagnostics=diagnostics)
    horizon = T_cdf.size - 1
    W1 = w1_tail_sequence(M, float(p[-1]), horizon, forced=forced, diagnostics=diagnostics)
    tau_pi0 = hitting_tail_sequence(M, v, horizon)
    tau_piN = hitting_tail_sequence(M, p, horizon)
    if np.any(tau_pi0 < tau_piN - MONOTONE_TOL):
        _complain("tau from pi0 is not stochastically larger than tau from pi", forced, diagnostics)

    triple = qsd(M)
    u_limit = tail_ratio_limit(M, v, p, forced=forced, diagnostics=diagnostics, triple=triple)
    bounds = exponential_bound(M, v, p, forced=forced, diagnostics=diagnostics)
    check = geometric_convolution_check(M, p, pi0=v)
    mean_T = mean_strong_stationary_time(M, v, p, forced=forced)
    logger.info("hitting report N=%d: E(T)=%.6g, rho_N=%.12g, horizon %d", N, mean_T.value, triple.rho, horizon)
    return HittingReport(
        N=N,
        T_cdf=T_cdf,
        sep=1.0 - T_cdf,
        W1_tail=W1,
        tau_tail_pi0=tau_pi0,
        tau_tail_piN=tau_piN,
        mean_T=mean_T.value,
        mean_tau_pi0=hitting_mean(M, v),
        mean_tau_piN=hitting_mean(M, p),
        second_moment_tau_piN=hitting_second_moment(M, p),
        qsd_mu=triple.mu,
        rho_N=triple.rho,
        qsd_phi=triple.phi,
        u_limit=u_limit,
        exp_bound_piN=bounds.bound_piN,
        exp_bound_pi0=bounds.bound_pi0,
        observed_sup_piN=bounds.observed_sup_piN,
        observed_sup_pi0=bounds.observed_sup_pi0,
        lambda_2=second_eigenvalue(M, p),
        convolution_residual=check.max_residual,
        factorization_residual=check.factorization_residual,
        time_reversed=time_reversed,
        diagnostics=tuple(diagnostics),
    )
