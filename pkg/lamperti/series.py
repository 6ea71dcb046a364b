"""
series.py
=========
Formal power series arithmetic and the Lagrange-inversion engine behind the
inverse design problem.

For a target with pgf Phi(z) = z Psi(z) and mass pi1 = Psi(0) at state 1, the
compositional inverse has coefficients

    phi_n = [z^n] Phi^{-1}(z) = (1/n) [z^{n-1}] Psi(z)^{-n},   h_n = phi_n pi1^n,

so that Phi^{-1}(y) = sum_n h_n (y / pi1)^n. Two independent routes are kept:

  * the power-series route (production): R = Psi / pi1, S = 1 / R and
    h_n = (1/n) [z^{n-1}] S^n through the J.C.P. Miller power recurrence;
  * the partition route (cross-check): star sums C_{n-1,k} over multisets of
    parts, enumerated with sympy, combined with falling factorials.

Outside the disk of convergence the series is continued by diagonal Pade
approximants and only accepted when the continuation can be certified.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.interpolate import pade
from sympy.utilities.iterables import partitions

from lamperti.config import (
    CROSS_CHECK_RTOL,
    LAMBERT_MAX_ITER,
    PADE_AGREEMENT_RTOL,
    PADE_CHECK_TERMS,
    PADE_COEFF_RTOL,
    PADE_MAX_ORDER,
    PARTITION_CAP,
    SERIES_EARLY_STOP,
    SERIES_GROWTH_RUN,
    SERIES_N_MAX,
)
from lamperti.errors import ParameterError, RuntimeCapError, SeriesDivergenceError

logger = logging.getLogger(__name__)

Number = Union[int, float]


# ──────────────────────────────────────────────
# PowerSeries
# ──────────────────────────────────────────────
class PowerSeries:
    """Truncated real power series  c[0] + c[1] z + ... + c[order] z^order.

    The coefficient array is read-only. Passing `order` larger than the
    number of coefficients pads with zeros (a polynomial is an exact series);
    a smaller `order` truncates.
    """

    __slots__ = ("_c",)

    def __init__(self, coeffs: Sequence[Number], order: Optional[int] = None):
        c = np.array(coeffs, dtype=float).ravel()
        if c.size == 0:
            raise ParameterError("a power series needs at least one coefficient")
        if order is not None:
            order = int(order)
            if order < 0:
                raise ParameterError(f"order must be nonnegative, got {order}")
            if order + 1 > c.size:
                c = np.concatenate([c, np.zeros(order + 1 - c.size)])
            else:
                c = c[: order + 1].copy()
        c.setflags(write=False)
        self._c = c

    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def order(self) -> int:
        return self._c.size - 1

    def __len__(self) -> int:
        return self._c.size

    def __getitem__(self, k: int) -> float:
        if not isinstance(k, (int, np.integer)):
            raise TypeError("PowerSeries indices must be integers")
        if k < 0 or k > self.order:
            raise IndexError(f"coefficient of z^{k} is beyond the series order {self.order}")
        return float(self._c[k])

    def __repr__(self) -> str:
        return f"PowerSeries({self._c.tolist()!r})"

    def truncate(self, order: int) -> "PowerSeries":
        if order > self.order:
            raise ParameterError(f"cannot extend a series of order {self.order} to {order}")
        return PowerSeries(self._c[: order + 1])

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self._c)

    def __neg__(self) -> "PowerSeries":
        return PowerSeries(-self._c)

    def __add__(self, other) -> "PowerSeries":
        if isinstance(other, PowerSeries):
            order = min(self.order, other.order)
            return PowerSeries(self._c[: order + 1] + other._c[: order + 1])
        c = self._c.copy()
        c[0] += float(other)
        return PowerSeries(c)

    __radd__ = __add__

    def __sub__(self, other) -> "PowerSeries":
        return self + (-other)

    def __rsub__(self, other) -> "PowerSeries":
        return (-self) + other

    def __mul__(self, other) -> "PowerSeries":
        if isinstance(other, PowerSeries):
            return fps_mul(self, other, min(self.order, other.order))
        return PowerSeries(self._c * float(other))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "PowerSeries":
        if isinstance(other, PowerSeries):
            order = min(self.order, other.order)
            return fps_mul(self, fps_reciprocal(other, order), order)
        return PowerSeries(self._c / float(other))

    def __pow__(self, r: Number) -> "PowerSeries":
        return fps_pow(self, r, self.order)


def _check_order(order: int, *series: PowerSeries) -> None:
    if order < 0:
        raise ParameterError(f"order must be nonnegative, got {order}")
    for s in series:
        if s.order < order:
            raise ParameterError(f"order mismatch: requested {order}, input has order {s.order}")


def fps_mul(a: PowerSeries, b: PowerSeries, order: int) -> PowerSeries:
    """Cauchy product of a and b truncated at `order`."""
    _check_order(order, a, b)
    c = np.convolve(a.coeffs[: order + 1], b.coeffs[: order + 1])[: order + 1]
    return PowerSeries(c)


def fps_reciprocal(a: PowerSeries, order: int) -> PowerSeries:
    """1/a truncated at `order`; requires a nonzero constant term."""
    _check_order(order, a)
    c = a.coeffs
    if c[0] == 0.0:
        raise ParameterError("cannot invert a series with zero constant term")
    b = np.zeros(order + 1)
    b[0] = 1.0 / c[0]
    for k in range(1, order + 1):
        b[k] = -np.dot(c[1 : k + 1], b[k - 1 :: -1]) / c[0]
    return PowerSeries(b)


def fps_log(a: PowerSeries, order: int) -> PowerSeries:
    """log(a) truncated at `order`; requires a positive constant term."""
    _check_order(order, a)
    c = a.coeffs
    if not c[0] > 0.0:
        raise ParameterError(f"log needs a positive constant term, got {c[0]}")
    b = np.zeros(order + 1)
    b[0] = math.log(c[0])
    for n in range(1, order + 1):
        k = np.arange(1, n)
        s = np.dot(k * b[1:n], c[n - 1 : 0 : -1]) if n > 1 else 0.0
        b[n] = (c[n] - s / n) / c[0]
    return PowerSeries(b)


def fps_exp(a: PowerSeries, order: int) -> PowerSeries:
    """exp(a) truncated at `order`; requires a zero constant term."""
    _check_order(order, a)
    c = a.coeffs
    if c[0] != 0.0:
        raise ParameterError(f"exp needs a zero constant term, got {c[0]}")
    b = np.zeros(order + 1)
    b[0] = 1.0
    for n in range(1, order + 1):
        k = np.arange(1, n + 1)
        b[n] = np.dot(k * c[1 : n + 1], b[n - 1 :: -1]) / n
    return PowerSeries(b)


def fps_pow(a: PowerSeries, r: Number, order: int) -> PowerSeries:
    """a**r truncated at `order` (real r, positive constant term).

    Uses the J.C.P. Miller recurrence
        b_k = (1/(k a_0)) sum_{j=1}^k ((r+1) j - k) a_j b_{k-j},
    which equals exp(r log a) coefficientwise and is exact for polynomials.
    """
    _check_order(order, a)
    c = a.coeffs
    if not c[0] > 0.0:
        raise ParameterError(f"power needs a positive constant term, got {c[0]}")
    r = float(r)
    b = np.zeros(order + 1)
    b[0] = c[0] ** r
    for k in range(1, order + 1):
        j = np.arange(1, k + 1)
        b[k] = np.dot(((r + 1.0) * j - k) * c[1 : k + 1], b[k - 1 :: -1]) / (k * c[0])
    return PowerSeries(b)


# ──────────────────────────────────────────────
# Partition route
# ──────────────────────────────────────────────
def _validate_ratios(pi_ratios: Sequence[float]) -> np.ndarray:
    ratios = np.asarray(pi_ratios, dtype=float).ravel()
    if ratios.size == 0 or np.any(ratios < 0) or not np.all(np.isfinite(ratios)):
        raise ParameterError("pi_ratios must be a nonempty sequence of finite nonnegative reals")
    return ratios


def _largest_part(ratios: np.ndarray, m: int, max_part: Optional[int]) -> int:
    limit = m if max_part is None else min(int(max_part), m)
    return min(limit, ratios.size - 1)


def _star_row(ratios: np.ndarray, m: int, max_part: Optional[int]) -> np.ndarray:
    """C_{m,k} for k = 0..m in a single pass over the partitions of m."""
    if m == 0:
        return np.array([1.0])
    rows = [[] for _ in range(m + 1)]
    largest = _largest_part(ratios, m, max_part)
    if largest >= 1:
        for part in partitions(m, k=largest):
            k = sum(part.values())
            term = 1.0
            for size, mult in part.items():
                term *= ratios[size] ** mult / math.factorial(mult)
            rows[k].append(term)
    return np.array([math.fsum(sorted(row, key=abs)) for row in rows])


def star_coeff(pi_ratios: Sequence[float], n: int, k: int, max_part: Optional[int] = None) -> float:
    """Star sum C_{n-1,k}: sum over k_m >= 0 with sum k_m = k and sum m k_m = n-1
    of prod_m r_m^{k_m} / k_m!, where r_m = pi_ratios[m] = pi(m+1)/pi(1).

    Parts are capped at `max_part` (None for countable support).
    """
    ratios = _validate_ratios(pi_ratios)
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if not 0 <= k <= n - 1:
        raise ParameterError(f"k must lie in [0, n-1] = [0, {n - 1}], got {k}")
    if n - 1 > PARTITION_CAP:
        raise ParameterError(f"n-1 = {n - 1} exceeds the partition enumeration cap {PARTITION_CAP}")
    if n == 1:
        return 1.0
    if k == 0:
        return 0.0
    largest = _largest_part(ratios, n - 1, max_part)
    if largest < 1:
        return 0.0
    terms = []
    for part in partitions(n - 1, m=k, k=largest):
        if sum(part.values()) != k:
            continue
        term = 1.0
        for size, mult in part.items():
            term *= ratios[size] ** mult / math.factorial(mult)
        terms.append(term)
    return math.fsum(sorted(terms, key=abs))


def _partition_h(ratios: np.ndarray, n: int, max_part: Optional[int]):
    """h_n from the partition formula, with the magnitude of its terms."""
    row = _star_row(ratios, n - 1, max_part)
    # rising factorial n (n+1) ... (n+k-1)
    terms = [(-1) ** k * float(math.prod(range(n, n + k))) * row[k] for k in range(1, n)]
    value = math.fsum(sorted(terms, key=abs)) / n
    scale = math.fsum(abs(t) for t in terms) / n
    return value, scale


# ──────────────────────────────────────────────
# Lagrange inversion
# ──────────────────────────────────────────────
@dataclass(frozen=True)
class InverseCoeffs:
    """Coefficients of Phi^{-1}; arrays are indexed by n with index 0 equal to 0."""

    phi: np.ndarray
    h: np.ndarray
    pi1: float
    consistent: Optional[bool] = None
    max_discrepancy: float = 0.0
    checked_up_to: int = 0

    @property
    def n_max(self) -> int:
        return self.h.size - 1


def _power_coeffs(s: np.ndarray, r: int, degree: int) -> np.ndarray:
    """Coefficients of S**r up to `degree` for a series with S(0) = 1."""
    b = np.zeros(degree + 1)
    b[0] = 1.0
    for k in range(1, degree + 1):
        j = np.arange(1, k + 1)
        b[k] = np.dot(((r + 1.0) * j - k) * s[1 : k + 1], b[k - 1 :: -1]) / k
    return b


def lagrange_inverse_coeffs(
    psi: PowerSeries,
    n_max: int = SERIES_N_MAX,
    x_max: Optional[float] = None,
    max_part: Optional[int] = None,
    cross_check: bool = True,
) -> InverseCoeffs:
    """phi_n and h_n of Phi^{-1} for Phi(z) = z psi(z), n = 1..n_max.

    When `x_max` is given, the computation stops early once two consecutive
    terms |h_n (x_max/pi1)^n| fall below 1e-15. The partition route is
    compared with the power-series route for every n below the enumeration
    cap; disagreement raises SeriesDivergenceError.
    """
    if n_max < 1:
        raise ParameterError(f"n_max must be >= 1, got {n_max}")
    pi1 = psi[0]
    if pi1 == 0.0:
        raise ParameterError("psi has a zero constant term (no mass at state 1)")
    if pi1 < 0.0:
        raise ParameterError(f"psi constant term must be positive, got {pi1}")
    if psi.order < n_max - 1:
        raise ParameterError(f"psi has order {psi.order}; need at least n_max - 1 = {n_max - 1}")

    r = psi.coeffs[:n_max] / pi1
    s = fps_reciprocal(PowerSeries(r), n_max - 1).coeffs

    h = np.zeros(n_max + 1)
    h[1] = 1.0
    log_y = math.log(x_max / pi1) if x_max is not None and x_max > 0 else None
    small_run = 0
    last = n_max
    for n in range(2, n_max + 1):
        h[n] = _power_coeffs(s, n, n - 1)[n - 1] / n
        if log_y is not None:
            small = h[n] == 0.0 or math.log(abs(h[n])) + n * log_y < math.log(SERIES_EARLY_STOP)
            small_run = small_run + 1 if small else 0
            if small_run >= 2:
                last = n
                break
    h = h[: last + 1]
    logger.debug("lagrange_inverse_coeffs: %d coefficients (pi1=%g)", last, pi1)

    n_idx = np.arange(h.size, dtype=float)
    with np.errstate(over="ignore"):
        phi = h * np.power(pi1, -n_idx)
    phi[0] = 0.0

    consistent = None
    worst = 0.0
    checked = 0
    if cross_check:
        ratios = r if max_part is None else r[: int(max_part) + 1]
        checked = min(h.size - 1, PARTITION_CAP + 1)
        for n in range(2, checked + 1):
            value, scale = _partition_h(ratios, n, max_part)
            diff = abs(value - h[n])
            size = max(abs(value), abs(h[n]))
            if size > 0:
                worst = max(worst, diff / size)
            if diff > CROSS_CHECK_RTOL * size + 64 * np.finfo(float).eps * scale:
                raise SeriesDivergenceError(
                    f"partition and power-series routes disagree at n={n}: "
                    f"{value!r} vs {h[n]!r} (numerical breakdown)"
                )
        consistent = True
    return InverseCoeffs(phi=phi, h=h, pi1=float(pi1), consistent=consistent,
                         max_discrepancy=worst, checked_up_to=checked)


# ──────────────────────────────────────────────
# Evaluation and continuation
# ──────────────────────────────────────────────
@dataclass(frozen=True)
class SeriesValue:
    value: float
    method: str
    terms: int


def _direct_sum(h: np.ndarray, y: float) -> Optional[SeriesValue]:
    n = np.arange(h.size, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        terms = h * np.power(y, n)
    terms[0] = 0.0
    growth_run = 0
    small_run = 0
    partial = 0.0
    for k in range(1, h.size):
        t = terms[k]
        if not np.isfinite(t):
            return None
        partial += t
        if k > 1 and abs(t) > abs(terms[k - 1]) and terms[k - 1] != 0.0:
            growth_run += 1
            if growth_run >= SERIES_GROWTH_RUN:
                logger.debug("series terms grow for %d consecutive n at y=%g", growth_run, y)
                return None
        else:
            growth_run = 0
        if abs(t) < SERIES_EARLY_STOP * max(1.0, abs(partial)):
            small_run += 1
            if small_run >= 2:
                return SeriesValue(math.fsum(terms[1 : k + 1]), "direct", k)
        else:
            small_run = 0
    return None


def _denominator_clear(q: np.poly1d, y: float) -> bool:
    grid = np.linspace(0.0, y, 257)
    values = q(grid)
    return bool(np.all(values > 1e-12 * np.max(np.abs(values))))


def _reproduces(p: np.poly1d, q: np.poly1d, h: np.ndarray, used: int) -> bool:
    if h.size - used < 2:
        return False
    top = min(h.size - 1, used + PADE_CHECK_TERMS - 1)
    num = PowerSeries(p.coeffs[::-1], order=top)
    den = PowerSeries(q.coeffs[::-1], order=top)
    expansion = (num / den).coeffs
    extra = slice(used, top + 1)
    floor = np.finfo(float).eps * np.max(np.abs(h[:used]))
    diff = np.abs(expansion[extra] - h[extra])
    return bool(np.all(diff <= PADE_COEFF_RTOL * np.maximum(np.abs(h[extra]), floor)))


def _pade_value(h: np.ndarray, y: float) -> Optional[SeriesValue]:
    values = []
    for m in range(1, PADE_MAX_ORDER + 1):
        used = 2 * m + 1
        if used > h.size:
            break
        try:
            with np.errstate(all="ignore"):
                p, q = pade(h[:used], m, m)
        except (np.linalg.LinAlgError, ValueError):
            values.append(math.nan)
            continue
        if q(0.0) < 0:
            p, q = -p, -q
        if not _denominator_clear(q, y):
            values.append(math.nan)
            continue
        v = float(p(y) / q(y))
        if not math.isfinite(v):
            values.append(math.nan)
            continue
        if _reproduces(p, q, h, used):
            logger.debug("pade [%d/%d] reproduces the unused coefficients at y=%g", m, m, y)
            return SeriesValue(v, "pade", m)
        values.append(v)
        last = values[-3:]
        if len(last) == 3 and all(math.isfinite(u) for u in last):
            if max(last) - min(last) <= PADE_AGREEMENT_RTOL * max(1.0, abs(v)):
                logger.debug("pade orders %d..%d agree at y=%g", m - 2, m, y)
                return SeriesValue(v, "pade", m)
    return None


def evaluate_inverse(coeffs: InverseCoeffs, x: float) -> SeriesValue:
    """Sum h_n (x/pi1)^n, continuing by Pade when the partial sums do not settle."""
    y = float(x) / coeffs.pi1
    if y == 0.0:
        return SeriesValue(0.0, "direct", 0)
    result = _direct_sum(coeffs.h, y)
    if result is None:
        result = _pade_value(coeffs.h, y)
    if result is None:
        raise SeriesDivergenceError(
            f"inverse series diverges at x={x!r} and no Pade continuation could be certified"
        )
    return result


# ──────────────────────────────────────────────
# Lambert W
# ──────────────────────────────────────────────
def lambert_w(x: float) -> float:
    """Principal branch W(x) for x >= 0 by Halley iteration from log(1+x)."""
    x = float(x)
    if x < 0 or math.isnan(x):
        raise ParameterError(f"lambert_w is only defined here for x >= 0, got {x}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf
    eps = np.finfo(float).eps
    w = math.log1p(x)
    for _ in range(LAMBERT_MAX_ITER):
        # Halley on g(w) = w - x e^{-w}: g' = 1 + x e^{-w}, g'' = -x e^{-w}; no overflow
        e = x * math.exp(-w)
        g = w - e
        d = 1.0 + e
        step = g / (d + g * e / (2.0 * d))
        w -= step
        if abs(step) <= 4.0 * eps * (1.0 + abs(w)) or abs(g) <= 4.0 * eps * (abs(w) + e):
            return w
    raise RuntimeCapError(f"lambert_w did not converge for x={x} in {LAMBERT_MAX_ITER} iterations")


def lambert_w_scaled(lam: float, x: float) -> float:
    """W_lambda(x) = W(lambda x)/lambda, solving x = w e^{lambda w}."""
    if lam <= 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    return lambert_w(lam * x) / lam
