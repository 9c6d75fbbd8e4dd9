"""Cantor subsets of [0, 1] on which a Takagi function is constant.

When ``ab`` is a root of a Littlewood polynomial with coefficients ``eps`` of
length k, the block sum ``sum_{n=jk}^{(j+1)k-1} a**n T(b**n x)`` has derivative
``+-(ab)**(jk) * sum eps_n (ab)**n = 0`` on every grid cell whose sign pattern
is ``+-eps``.  Stage 1 picks a symmetric pair of such cells with equal value;
each later stage keeps, inside every surviving cell, the ``b`` sub-cells where
the next block is flat at the common value.  The nested cells converge to a
self-similar Cantor set of dimension ``1/k`` on which ``T_{a,b}`` is constant.

Cells are stored as exact integers: numerator ``q`` and level ``L`` stand for
the open interval ``(q/(2 b**L), (q+1)/(2 b**L))``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._validation import check_positive_int, check_tol
from .core import TakagiParams, evaluate_many
from .exceptions import ConstructionError, PrecisionBudgetError, ValidationError
from .littlewood import CertifiedRoot, SignVector

CERT_TOL = 1e-9
PRECISION_BITS = 48


@dataclass(frozen=True, order=True)
class PlatformInterval:
    numerator: int
    level: int
    depth: int = 1

    def bounds(self, b):
        den = 2 * b**self.level
        return Fraction(self.numerator, den), Fraction(self.numerator + 1, den)

    def float_bounds(self, b):
        lo, hi = self.bounds(b)
        return float(lo), float(hi)

    def length(self, b):
        return Fraction(1, 2 * b**self.level)

    def contains(self, other, b):
        """Exact containment of another cell (integer arithmetic only)."""
        if other.level < self.level:
            return False
        scale = b ** (other.level - self.level)
        return self.numerator * scale <= other.numerator < (self.numerator + 1) * scale


@dataclass
class CantorApprox:
    params: TakagiParams
    coeffs: SignVector
    depth: int
    stages: list  # stages[j-1]: sorted int array of numerators at depth j
    stage_values: list  # common block-sum value a_j per stage
    level_value: float
    level_error: float
    dim: float = field(init=False)

    def __post_init__(self):
        self.dim = 1.0 / self.k

    @property
    def k(self):
        return self.coeffs.k

    def level(self, depth):
        return depth * self.k - 1

    @property
    def intervals(self):
        lvl = self.level(self.depth)
        return [PlatformInterval(int(q), lvl, self.depth) for q in self.stages[-1]]

    def intervals_at(self, depth):
        lvl = self.level(depth)
        return [PlatformInterval(int(q), lvl, depth) for q in self.stages[depth - 1]]

    def midpoints(self, depth=None):
        depth = self.depth if depth is None else depth
        den = 2.0 * self.params.b ** self.level(depth)
        return (self.stages[depth - 1].astype(float) + 0.5) / den

    def as_dict(self):
        return {
            "params": {"a": self.params.a, "b": self.params.b},
            "k": self.k,
            "coeffs": self.coeffs.as_string(),
            "depth": self.depth,
            "level_value": self.level_value,
            "level_error": self.level_error,
            "dim": self.dim,
            "intervals": [[int(q), self.level(self.depth)] for q in self.stages[-1]],
        }


# --------------------------------------------------------------------------
# Helpers on integer cells
# --------------------------------------------------------------------------


def _check_certificate(p, coeffs):
    coeffs = coeffs if isinstance(coeffs, SignVector) else SignVector(coeffs)
    residual = abs(math.fsum(c * p.ab**n for n, c in enumerate(coeffs)))
    if residual > CERT_TOL:
        raise ValidationError(
            f"coefficients {coeffs.as_string()} do not vanish at ab={p.ab!r} (residual {residual:.3g})"
        )
    return coeffs


def _signs_on_cells(q, level, start, stop, b):
    """Slope signs of ``T(b**n x)``, n in [start, stop), on level-``level`` cells ``q``."""
    cols = []
    for n in range(start, stop):
        parent = q // b ** (level - n)
        cols.append(np.where(parent % 2 == 0, 1, -1))
    return np.stack(cols, axis=1)


def _block_sum_at_midpoints(p, q, level, start, stop):
    """``sum_{n=start}^{stop-1} a**n T(b**n x)`` at cell midpoints, with exact fractional parts."""
    b = p.b
    den = 4 * b**level
    r = (2 * q + 1) % den
    for _ in range(start):
        r = (r * b) % den
    total = np.zeros(q.shape)
    for n in range(start, stop):
        u = np.minimum(r, den - r).astype(float) / den
        total += p.a**n * u
        r = (r * b) % den
    return total


def sign_pattern_cells(p: TakagiParams, block, coeffs, parent=None):
    """Cells of the ``1/(2 b**((block+1)k - 1))`` grid with block sign pattern ``+-coeffs``.

    ``parent`` is a :class:`PlatformInterval` (or ``None`` for all of [0, 1]).
    On each returned cell the block sum is constant.
    """
    coeffs = _check_certificate(p, coeffs)
    k = coeffs.k
    level = (block + 1) * k - 1
    b = p.b
    if parent is None:
        first, last = 0, 2 * b**level
    else:
        if parent.level > level:
            return []
        scale = b ** (level - parent.level)
        first, last = parent.numerator * scale, (parent.numerator + 1) * scale
    q = np.arange(first, last, dtype=np.int64)
    keep = _pattern_mask(q, level, block * k, coeffs, b)
    return [PlatformInterval(int(v), level, block + 1) for v in q[keep]]


def _pattern_mask(q, level, start, coeffs, b):
    signs = _signs_on_cells(q, level, start, start + len(coeffs), b)
    target = np.asarray(coeffs)
    return np.all(signs == target, axis=1) | np.all(signs == -target, axis=1)


def _group_by_value(values, tol):
    """Indices grouped by value: consecutive sorted values closer than ``tol`` merge."""
    order = np.argsort(values, kind="stable")
    groups = []
    for idx in order:
        if groups and values[idx] - values[groups[-1][-1]] <= tol:
            groups[-1].append(idx)
        else:
            groups.append([idx])
    return groups


def _check_budget(p, k, depth):
    bits = depth * k * math.log2(p.b)
    if bits > PRECISION_BITS:
        raise PrecisionBudgetError(
            f"depth={depth} with k={k}, b={p.b} needs {bits:.1f} bits (budget {PRECISION_BITS})"
        )


# --------------------------------------------------------------------------
# Construction
# --------------------------------------------------------------------------


def build(p: TakagiParams, cert: CertifiedRoot, depth, tol=1e-9):
    """Nested platform intervals to the given depth.

    Raises :class:`ConstructionError` when a stage does not give the expected
    number of equal-value cells (two at depth 1, ``b`` per parent afterwards).
    """
    depth = check_positive_int(depth, "depth")
    tol = check_tol(tol)
    if abs(cert.beta - p.ab) > CERT_TOL:
        raise ValidationError(f"certificate root {cert.beta!r} does not match ab={p.ab!r}")
    coeffs = _check_certificate(p, cert.coeffs)
    k = coeffs.k
    if k < 2:
        raise ValidationError("a length-1 sign vector has no roots")
    _check_budget(p, k, depth)
    b = p.b

    # Stage 1: flat cells of the first block, grouped by value.
    level = k - 1
    q = np.arange(2 * b**level, dtype=np.int64)
    q = q[_pattern_mask(q, level, 0, coeffs, b)]
    values = _block_sum_at_midpoints(p, q, level, 0, k)
    last = 2 * b**level - 1
    chosen = None
    for group in _group_by_value(values, tol):
        members = set(int(q[i]) for i in group)
        if len(members) >= 2 and any(last - m in members for m in members):
            lead = min(members)
            if chosen is None or lead < chosen[0]:
                chosen = (lead, group)
    if chosen is None:
        raise ConstructionError("no symmetric pair of equal-value platform cells at stage 1")
    group = chosen[1]
    stage_q = np.sort(q[group])
    if stage_q.size != 2:
        raise ConstructionError(f"stage 1 produced {stage_q.size} equal-value cells, expected 2")
    a1 = float(np.mean(values[group]))
    spread = float(np.ptp(values[group]))
    stages = [stage_q]
    stage_values = [a1]
    error = spread

    for j in range(2, depth + 1):
        parent_level = (j - 1) * k - 1
        level = j * k - 1
        scale = b ** (level - parent_level)
        parents = stages[-1]
        cand = (parents[:, None] * scale + np.arange(scale)[None, :]).ravel()
        owner = np.repeat(np.arange(parents.size), scale)
        mask = _pattern_mask(cand, level, (j - 1) * k, coeffs, b)
        cand, owner = cand[mask], owner[mask]
        values = _block_sum_at_midpoints(p, cand, level, (j - 1) * k, j * k)
        expected = a1 * p.a ** ((j - 1) * k)
        band = tol * p.a ** ((j - 1) * k)
        hit = np.abs(values - expected) <= band
        counts = np.bincount(owner[hit], minlength=parents.size)
        if np.any(counts != b):
            raise ConstructionError(
                f"stage {j}: parents received {counts.min()}..{counts.max()} equal-value cells, expected {b}"
            )
        stages.append(np.sort(cand[hit]))
        stage_values.append(float(np.mean(values[hit])))
        error += float(np.ptp(values[hit]))

    level_value = math.fsum(stage_values)
    error += (depth * k + 2) * 2.0**-52 * max(level_value, 1.0)
    return CantorApprox(
        params=p,
        coeffs=coeffs,
        depth=depth,
        stages=stages,
        stage_values=stage_values,
        level_value=level_value,
        level_error=error,
    )


def tail_spread_bound(c: CantorApprox):
    """``2 a**(dk) / (2 (1 - a))``: spread of the unconstrained tail past depth d."""
    p = c.params
    return 2.0 * p.a ** (c.depth * c.k) * p.sup_bound


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def verify_constancy(c: CantorApprox, samples_per_interval=3, tol=1e-12):
    """Largest ``|T(x) - level_value|`` over interior sample points of the deepest cells."""
    samples_per_interval = check_positive_int(samples_per_interval, "samples_per_interval")
    tol = check_tol(tol)
    b = c.params.b
    den = 2.0 * b ** c.level(c.depth)
    # Midpoint first, then a golden-ratio sequence: b-adic offsets such as 1/4
    # make most tail terms vanish and would hide the true spread.
    frac = (0.5 + np.arange(samples_per_interval) * _INV_PHI) % 1.0
    xs = ((c.stages[-1].astype(float)[:, None] + frac[None, :]) / den).ravel()
    values, _, _ = evaluate_many(c.params, xs, tol)
    return float(np.max(np.abs(values - c.level_value)))


def box_dim_of_intervals(c: CantorApprox):
    """Least-squares slope of log(count) against log(1/length) over the stages."""
    if c.depth < 2:
        raise ValidationError("need depth >= 2 to fit a slope")
    b = c.params.b
    counts = np.array([s.size for s in c.stages], dtype=float)
    inv_len = np.array([2.0 * b ** c.level(j) for j in range(1, c.depth + 1)])
    slope, _ = np.polyfit(np.log(inv_len), np.log(counts), 1)
    return float(slope)


def intervals_csv(c: CantorApprox, header=None):
    """Interval endpoints of the deepest stage, one row per cell."""
    buf = io.StringIO()
    if header:
        buf.write(header)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["numerator", "level", "lo", "hi"])
    b = c.params.b
    lvl = c.level(c.depth)
    for q in c.stages[-1]:
        lo, hi = PlatformInterval(int(q), lvl).float_bounds(b)
        writer.writerow([int(q), lvl, f"{lo:.17g}", f"{hi:.17g}"])
    return buf.getvalue()
