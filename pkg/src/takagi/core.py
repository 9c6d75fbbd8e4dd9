"""Tent map, Takagi series and their truncations.

The Takagi function with parameters ``(a, b)`` is

    T_{a,b}(x) = sum_{n >= 0} a**n * T(b**n * x)

where ``T`` is the period-1 tent map.  Everything here works in double
precision, but the fractional parts ``frac(b**n * x)`` are formed exactly from
the binary representation of ``x`` so that no error is amplified by the
factor ``b**n``.  The only errors left are the truncated tail, bounded by
``a**(N+1) / (2 * (1 - a))``, and ordinary summation round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Integral, Real

import numpy as np

from ._validation import (
    check_nonneg_int,
    check_positive_int,
    check_real,
    check_tol,
    check_x_array,
)
from .exceptions import ValidationError

#: Marker returned by :func:`tent_sign` and :func:`partial_derivative` at breakpoints.
UNDEFINED = None

_EPS = 2.0**-52
_TWO64 = 2.0**64
# Floats whose fractional part is >= 2**-12 are integer multiples of 2**-64.
_EXACT_FRAC_FLOOR = 2.0**-12
_AB_SNAP = 1e-12


@dataclass(frozen=True)
class TakagiParams:
    """Validated parameter pair ``(a, b)``.

    ``b`` must be an integer >= 2 and ``a`` must satisfy ``0 < a < 1`` and
    ``1 <= a*b <= 2``.  Products within 1e-12 of 1 or 2 are snapped so that
    ``TakagiParams.from_ab(1.0, 3)`` is accepted.
    """

    a: float
    b: int
    ab: float = field(init=False)
    B: float = field(init=False)

    def __post_init__(self):
        a = check_real(self.a, "a")
        b = self.b
        if isinstance(b, Real) and not isinstance(b, (Integral, bool)) and float(b).is_integer():
            b = int(b)
        if isinstance(b, bool) or not isinstance(b, Integral):
            raise ValidationError(f"b must be an integer, got {self.b!r}")
        b = int(b)
        if b < 2:
            raise ValidationError(f"b must be >= 2, got {b}")
        if not 0.0 < a < 1.0:
            raise ValidationError(f"a must lie in (0, 1), got {a!r}")
        ab = a * b
        if abs(ab - 1.0) <= _AB_SNAP:
            ab = 1.0
        elif abs(ab - 2.0) <= _AB_SNAP:
            ab = 2.0
        if not 1.0 <= ab <= 2.0:
            raise ValidationError(f"a*b must lie in [1, 2], got {ab!r}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "ab", ab)
        object.__setattr__(self, "B", 2.0 + math.log(a) / math.log(b))

    @classmethod
    def from_ab(cls, ab, b):
        return cls(float(ab) / b, b)

    @property
    def holder(self):
        """Oscillation exponent ``-ln a / ln b`` (1 when ``ab == 1``)."""
        return -math.log(self.a) / math.log(self.b)

    @property
    def sup_bound(self):
        """Upper bound ``1 / (2 (1 - a))`` for the function values."""
        return 0.5 / (1.0 - self.a)

    def tail_bound(self, M):
        """Bound on ``sum_{n > M} a**n T(b**n x)``."""
        return self.a ** (M + 1) * self.sup_bound

    def as_dict(self):
        return {"a": self.a, "b": self.b, "ab": self.ab, "B": self.B}


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        lo = check_real(self.lo, "lo")
        hi = check_real(self.hi, "hi")
        if not lo < hi:
            raise ValidationError(f"interval needs lo < hi, got [{lo!r}, {hi!r}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def length(self):
        return self.hi - self.lo


@dataclass(frozen=True)
class EvalResult:
    value: float
    error_bound: float
    terms_used: int


# --------------------------------------------------------------------------
# Exact fractional parts
# --------------------------------------------------------------------------


def _frac(x):
    return x - math.floor(x)


def _frac_power(x, b, n):
    """Exact ``frac(b**n * x)`` for a Python float or Fraction ``x``."""
    if isinstance(x, Fraction):
        num, den = x.numerator, x.denominator
    else:
        num, den = float(x).as_integer_ratio()
    return Fraction((num * b**n) % den, den)


def _frac_power_float(x, b, n):
    return float(_frac_power(x, b, n))


class _FracStream:
    """Yields ``frac(b**n * x)`` for n = 0, 1, 2, ... over an array of x.

    Most doubles in [0, 1) are integer multiples of 2**-64, so the fractional
    parts can be advanced exactly with wrapping uint64 multiplication.  The
    few entries with finer binary expansions fall back to Python integers.
    """

    def __init__(self, x, b):
        x = np.asarray(x, dtype=float)
        self.b = b
        f = x - np.floor(x)
        self.fast = (f == 0.0) | (f >= _EXACT_FRAC_FLOOR)
        self.r = np.zeros(x.shape, dtype=np.uint64)
        self.r[self.fast] = (f[self.fast] * _TWO64).astype(np.uint64)
        self.slow_idx = np.flatnonzero(~self.fast)
        self.slow = [Fraction(float(v)) for v in f[self.slow_idx]]
        self.mult = np.uint64(b)

    def current(self):
        out = self.r.astype(float) / _TWO64
        for i, v in zip(self.slow_idx, self.slow):
            out[i] = float(v)
        return out

    def advance(self):
        with np.errstate(over="ignore"):
            self.r *= self.mult
        self.slow = [(v * self.b) % 1 for v in self.slow]


def _tent_of_frac(u):
    return np.minimum(u, 1.0 - u)


# --------------------------------------------------------------------------
# Tent map
# --------------------------------------------------------------------------


def tent(x):
    """Period-1 tent map, ``x`` on [0, 1/2] and ``1 - x`` on [1/2, 1]."""
    if np.ndim(x) == 0 and not isinstance(x, np.ndarray):
        f = _frac(float(x))
        return min(f, 1.0 - f)
    f = np.asarray(x, dtype=float)
    f = f - np.floor(f)
    return np.minimum(f, 1.0 - f)


def tent_sign(x):
    """Slope of the tent map at ``x``: +1, -1, or :data:`UNDEFINED` at breakpoints."""
    if isinstance(x, Fraction):
        f = x - math.floor(x)
    else:
        f = _frac(float(x))
    if f == 0 or f * 2 == 1:
        return UNDEFINED
    return 1 if f * 2 < 1 else -1


def tent_sign_array(x):
    """Vectorised :func:`tent_sign`; breakpoints map to 0."""
    f = np.asarray(x, dtype=float)
    f = f - np.floor(f)
    out = np.where(f < 0.5, 1, -1).astype(np.int8)
    out[(f == 0.0) | (f == 0.5)] = 0
    return out


# --------------------------------------------------------------------------
# Series evaluation
# --------------------------------------------------------------------------


def _roundoff_bound(p, n_terms):
    return (n_terms + 2) * _EPS * p.sup_bound


def terms_for_tol(p, tol):
    """Smallest N whose truncation plus round-off error is at most ``tol``."""
    tol = check_tol(tol)
    a = p.a
    n = 0
    err = a * p.sup_bound
    while err + _roundoff_bound(p, n + 1) > tol:
        n += 1
        err *= a
        if n > 100_000:
            raise ValidationError(f"tol={tol!r} cannot be reached with a={a!r}")
    return n


def _series(p, x, start, stop):
    """``sum_{n=start}^{stop} a**n T(b**n x)`` over an array."""
    stream = _FracStream(x, p.b)
    total = np.zeros(np.shape(x), dtype=float)
    for _ in range(start):
        stream.advance()
    for n in range(start, stop + 1):
        total += p.a**n * _tent_of_frac(stream.current())
        stream.advance()
    return total


def evaluate(p: TakagiParams, x, tol=1e-12) -> EvalResult:
    """Evaluate ``T_{a,b}(x)`` for a scalar ``x`` to within ``tol``."""
    x = check_real(x, "x")
    n = terms_for_tol(p, tol)
    value = float(_series(p, np.array([x]), 0, n)[0])
    err = p.tail_bound(n) + _roundoff_bound(p, n + 1)
    return EvalResult(value=value, error_bound=err, terms_used=n)


def evaluate_many(p: TakagiParams, X, tol=1e-12):
    """Vectorised evaluation; returns ``(values, error_bound, terms_used)``."""
    xs = check_x_array(X)
    n = terms_for_tol(p, tol)
    values = _series(p, xs, 0, n)
    return values, p.tail_bound(n) + _roundoff_bound(p, n + 1), n


def partial_sum(p: TakagiParams, M, x):
    """``F_M(x) = sum_{n=0}^{M} a**n T(b**n x)``; scalar in, scalar out."""
    M = check_nonneg_int(M, "M")
    if np.ndim(x) == 0:
        return float(_series(p, np.array([check_real(x, "x")]), 0, M)[0])
    return _series(p, check_x_array(x), 0, M)


def tail(p: TakagiParams, M, x, tol=1e-12):
    """``G_M(x) = T_{a,b}(x) - F_M(x)`` summed directly from term M+1 on."""
    M = check_nonneg_int(M, "M")
    tol = check_tol(tol)
    n = max(terms_for_tol(p, tol), M + 1)
    if np.ndim(x) == 0:
        return float(_series(p, np.array([check_real(x, "x")]), M + 1, n)[0])
    return _series(p, check_x_array(x), M + 1, n)


def partial_derivative(p: TakagiParams, M, x):
    """Derivative of ``F_M`` at ``x``: ``sum_{n<=M} (ab)**n * tent_sign(b**n x)``.

    Returns :data:`UNDEFINED` when ``x`` lies on the ``1/(2 b**M)`` grid.
    """
    M = check_nonneg_int(M, "M")
    if not isinstance(x, Fraction):
        x = check_real(x, "x")
    total = 0.0
    for n in range(M + 1):
        s = tent_sign(_frac_power(x, p.b, n))
        if s is UNDEFINED:
            return UNDEFINED
        total += s * p.ab**n
    return total


def partial_derivative_many(p: TakagiParams, M, X):
    """Vectorised :func:`partial_derivative`; NaN marks grid breakpoints."""
    M = check_nonneg_int(M, "M")
    xs = check_x_array(X)
    stream = _FracStream(xs, p.b)
    total = np.zeros(xs.shape)
    undefined = np.zeros(xs.shape, dtype=bool)
    for n in range(M + 1):
        s = tent_sign_array(stream.current())
        undefined |= s == 0
        total += s * p.ab**n
        stream.advance()
    total[undefined] = np.nan
    return total


# --------------------------------------------------------------------------
# Oscillation
# --------------------------------------------------------------------------


def _breakpoints_in(p, lo, hi, max_level):
    pts = []
    for n in range(max_level + 1):
        den = 2 * p.b**n
        first = math.ceil(lo * den)
        last = math.floor(hi * den)
        if last - first > 100_000:
            break
        pts.append(np.arange(first, last + 1, dtype=float) / den)
    if not pts:
        return np.empty(0)
    pts = np.concatenate(pts)
    return pts[(pts >= lo) & (pts <= hi)]


def oscillation(p: TakagiParams, J: Interval, samples=64, tol=1e-10):
    """Lower estimate of ``sup_{x,y in J} |T(x) - T(y)|``.

    Evaluates at ``samples`` equispaced points plus every grid breakpoint
    ``m / (2 b**n)`` inside J with ``n <= log_b(samples)``.  The estimate
    never exceeds the true oscillation by more than ``2 * tol``.
    """
    if not isinstance(J, Interval):
        J = Interval(*J)
    samples = check_positive_int(samples, "samples", minimum=2)
    if J.lo < 0.0 or J.hi > 1.0:
        raise ValidationError(f"J must lie inside [0, 1], got [{J.lo}, {J.hi}]")
    level = int(math.floor(math.log(samples) / math.log(p.b) + 1e-12))
    xs = np.concatenate([np.linspace(J.lo, J.hi, samples), _breakpoints_in(p, J.lo, J.hi, level)])
    values, _, _ = evaluate_many(p, xs, tol)
    return float(values.max() - values.min())


def grid_rational(numerator, level, b):
    """The exact point ``numerator / (2 b**level)``."""
    return Fraction(numerator, 2 * b**level)
