"""Littlewood polynomials: enumeration, real roots on [1/2, 2], certification.

A Littlewood polynomial has every coefficient equal to +1 or -1.  Coefficient
vectors are stored lowest degree first, so ``SignVector((-1, -1, 1))`` is
``-1 - x + x**2`` whose positive root is the golden ratio.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_positive_int, check_real, check_tol
from .exceptions import ValidationError

DEFAULT_CAP = 26
SEARCH_LO = 0.5
SEARCH_HI = 2.0
_EPS = 2.0**-52


class SignVector(tuple):
    """Immutable sequence of +1/-1 entries, lowest degree first."""

    def __new__(cls, entries):
        entries = tuple(int(e) for e in entries)
        if not entries:
            raise ValidationError("a sign vector needs at least one entry")
        if any(e not in (-1, 1) for e in entries):
            raise ValidationError(f"sign vector entries must be +1 or -1, got {entries}")
        return super().__new__(cls, entries)

    @property
    def k(self):
        return len(self)

    def negated(self):
        return SignVector(-e for e in self)

    def __call__(self, x):
        """Horner evaluation; works on scalars and numpy arrays."""
        acc = 0.0
        for c in reversed(self):
            acc = acc * x + c
        return acc

    def derivative(self, x):
        acc = 0.0
        for n in range(len(self) - 1, 0, -1):
            acc = acc * x + n * self[n]
        return acc

    def exact_value(self, x):
        """Compensated sum of ``eps_n * x**n``."""
        return math.fsum(c * x**n for n, c in enumerate(self))

    def as_string(self):
        return "".join("+" if c > 0 else "-" for c in self)

    @classmethod
    def from_string(cls, text):
        mapping = {"+": 1, "-": -1, "−": -1}
        try:
            return cls(mapping[ch] for ch in text.strip())
        except KeyError as exc:
            raise ValidationError(f"bad sign string {text!r}") from exc

    def __repr__(self):
        return f"SignVector({self.as_string()!r})"


@dataclass(frozen=True)
class CertifiedRoot:
    coeffs: SignVector
    beta: float
    residual: float

    @property
    def k(self):
        return self.coeffs.k

    def as_row(self):
        return {
            "k": self.k,
            "coeffs": self.coeffs.as_string(),
            "beta": self.beta,
            "residual": self.residual,
        }


def _check_k(k, cap):
    k = check_positive_int(k, "k")
    if k > cap:
        raise ValidationError(f"k={k} exceeds the enumeration cap {cap}")
    return k


def enumerate_polynomials(k, cap=DEFAULT_CAP):
    """All sign vectors of length ``k`` with leading coefficient +1.

    Negating a polynomial does not move its roots, so this lists each root set
    once: ``2**(k-1)`` vectors in lexicographic order (-1 before +1).
    """
    k = _check_k(k, cap)
    for head in itertools.product((-1, 1), repeat=k - 1):
        yield SignVector(head + (1,))


def _sign_matrix(k):
    """All 2**(k-1) normalised sign vectors as an int8 matrix, lexicographic rows."""
    n = 2 ** (k - 1)
    idx = np.arange(n, dtype=np.int64)
    cols = []
    for j in range(k - 1):
        bit = (idx >> (k - 2 - j)) & 1
        cols.append(np.where(bit == 1, 1, -1))
    cols.append(np.ones(n, dtype=np.int64))
    return np.stack(cols, axis=1).astype(np.int8)


# --------------------------------------------------------------------------
# Real roots
# --------------------------------------------------------------------------


def _abs_bound(coeffs, x, order):
    """``sum |d^order/dx^order c_n x^n|`` at |x| = x, an upper bound for rounding estimates."""
    total = 0.0
    for n in range(order, len(coeffs)):
        f = math.perm(n, order)
        total += f * abs(x) ** (n - order)
    return total


def _bisect(coeffs, lo, hi, tol):
    f_lo = coeffs(lo)
    if f_lo == 0.0:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = coeffs(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def real_roots(coeffs, lo=SEARCH_LO, hi=SEARCH_HI, tol=1e-13):
    """Real roots of ``sum coeffs[n] x**n`` inside ``[lo, hi]``.

    Intervals are discarded when a second-order Taylor bound around the
    midpoint excludes a zero, and bisected directly once the first derivative
    provably keeps one sign.  Stretches where ``|p|`` is provably below the
    Horner rounding noise (the neighbourhood of an even-multiplicity root) are
    kept whole; hits closer than ``2 * tol`` are merged and reported once at
    their midpoint.
    """
    coeffs = coeffs if isinstance(coeffs, SignVector) else SignVector(coeffs)
    lo = check_real(lo, "lo")
    hi = check_real(hi, "hi")
    if not lo < hi:
        raise ValidationError(f"need lo < hi, got [{lo}, {hi}]")
    tol = check_tol(tol)
    if coeffs.k == 1:
        return []

    big = max(abs(lo), abs(hi))
    second = _abs_bound(coeffs, big, 2)
    k = coeffs.k
    # Horner rounding error, loosely 2k eps times the absolute-value polynomial.
    err0 = 2 * k * _EPS * _abs_bound(coeffs, big, 0)
    err1 = 2 * k * _EPS * _abs_bound(coeffs, big, 1)

    # Each hit is a span (left, right): a bisected root has left == right,
    # a cluster is an interval on which |p| is provably within rounding noise.
    spans = []
    stack = [(lo, hi)]
    while stack:
        left, right = stack.pop()
        mid = 0.5 * (left + right)
        half = 0.5 * (right - left)
        value = coeffs(mid)
        slope = coeffs.derivative(mid)
        spread = (abs(slope) + err1) * half + 0.5 * second * half * half
        if abs(value) - err0 > spread:
            continue
        if abs(value) + spread <= 2 * err0:
            spans.append((left, right))
            continue
        if abs(slope) - err1 > second * half:
            f_left, f_right = coeffs(left), coeffs(right)
            if abs(f_left) > err0 and abs(f_right) > err0:
                if (f_left < 0) != (f_right < 0):
                    root = _bisect(coeffs, left, right, tol)
                    spans.append((root, root))
                continue
        if right - left <= tol:
            spans.append((left, right))
            continue
        stack.append((mid, right))
        stack.append((left, mid))

    spans.sort()
    merged = []
    for left, right in spans:
        if merged and left - merged[-1][1] <= 2 * tol:
            merged[-1][1] = max(merged[-1][1], right)
        else:
            merged.append([left, right])
    return [0.5 * (left + right) for left, right in merged]


# --------------------------------------------------------------------------
# Certification and density witnesses
# --------------------------------------------------------------------------


def _check_beta(beta):
    beta = check_real(beta, "beta")
    if not SEARCH_LO <= beta <= SEARCH_HI:
        raise ValidationError(
            f"beta={beta!r} lies outside [1/2, 2]; Littlewood polynomials have no roots there"
        )
    return beta


def _partial_sums(beta, count, start):
    """Sums ``sum_{n<count} eps_n beta**(start+n)`` over all sign choices, lexicographic."""
    sums = np.zeros(1)
    for n in range(count):
        term = beta ** (start + n)
        sums = np.concatenate([sums[:, None] - term, sums[:, None] + term], axis=1).ravel()
    return sums


def _index_to_vector(index, k):
    head = tuple(1 if (index >> (k - 2 - j)) & 1 else -1 for j in range(k - 1))
    return SignVector(head + (1,))


def _hits_for_length(beta, k, tol):
    """Normalised sign vectors of length k with ``|sum eps_n beta**n| <= tol`` (float pass)."""
    if k == 1:
        return []
    low_len = (k - 1) // 2
    high_len = k - 1 - low_len
    low = _partial_sums(beta, low_len, 0)
    order = np.argsort(low, kind="stable")
    low_sorted = low[order]
    lead = beta ** (k - 1)
    high = _partial_sums(beta, high_len, low_len) + lead
    # Widen the float window; exact residuals are re-checked with fsum.
    slack = tol + 4 * k * _EPS * (SEARCH_HI ** (k))
    left = np.searchsorted(low_sorted, -high - slack, side="left")
    right = np.searchsorted(low_sorted, -high + slack, side="right")
    hits = []
    for hi_idx in np.flatnonzero(right > left):
        for pos in range(left[hi_idx], right[hi_idx]):
            index = (int(order[pos]) << high_len) | int(hi_idx)
            vec = _index_to_vector(index, k)
            if abs(vec.exact_value(beta)) <= tol:
                hits.append(vec)
    return hits


def certify(beta, k_max=DEFAULT_CAP, tol=1e-9, cap=DEFAULT_CAP):
    """Smallest-k Littlewood polynomial vanishing at ``beta`` to within ``tol``.

    Exhaustive over ``k = 1 .. k_max`` (meet-in-the-middle on the coefficient
    halves).  Ties at the minimal k go to the lexicographically smallest
    coefficient vector.  Returns ``None`` when nothing qualifies.
    """
    beta = _check_beta(beta)
    k_max = _check_k(k_max, cap)
    tol = check_tol(tol)
    for k in range(1, k_max + 1):
        hits = _hits_for_length(beta, k, tol)
        if hits:
            best = min(hits)
            return CertifiedRoot(coeffs=best, beta=beta, residual=abs(best.exact_value(beta)))
    return None


def min_residual(beta, k):
    """Brute-force ``min |sum eps_n beta**n|`` over all normalised vectors of length k."""
    if k == 1:
        return 1.0
    mat = _sign_matrix(k).astype(float)
    powers = beta ** np.arange(k)
    return float(np.min(np.abs(mat @ powers)))


def find_near(target, eps, k_cap=DEFAULT_CAP, tol=1e-14, cap=DEFAULT_CAP):
    """A Littlewood root within ``eps`` of ``target`` with the smallest possible k.

    For each k the polynomials are first screened in bulk with a derivative
    bound over the search window; survivors go through :func:`real_roots`.
    Among roots of the minimal k the closest to ``target`` wins.
    """
    target = _check_beta(target)
    eps = check_tol(eps, "eps")
    k_cap = _check_k(k_cap, cap)
    lo = max(SEARCH_LO, target - eps)
    hi = min(SEARCH_HI, target + eps)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    big = max(abs(lo), abs(hi))
    for k in range(2, k_cap + 1):
        mat = _sign_matrix(k).astype(float)
        values = mat @ (mid ** np.arange(k))
        slope_bound = sum(n * big ** (n - 1) for n in range(1, k))
        slack = 4 * k * _EPS * sum(big**n for n in range(k))
        candidates = np.flatnonzero(np.abs(values) <= slope_bound * half + slack)
        found = []
        for row in candidates:
            vec = SignVector(mat[row])
            for root in real_roots(vec, lo, hi, tol):
                if abs(root - target) <= eps:
                    found.append((abs(root - target), tuple(vec), root, vec))
        if found:
            _, _, root, vec = min(found)
            return CertifiedRoot(coeffs=vec, beta=root, residual=abs(vec.exact_value(root)))
    return None


def roots_csv(roots, header=None):
    """CSV text with one row per root: ``k, coeffs, beta, residual``."""
    buf = io.StringIO()
    if header:
        buf.write(header)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k", "coeffs", "beta", "residual"])
    for r in roots:
        writer.writerow([r.k, r.coeffs.as_string(), f"{r.beta:.17g}", f"{r.residual:.17g}"])
    return buf.getvalue()
