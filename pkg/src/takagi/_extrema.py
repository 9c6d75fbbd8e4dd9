"""Certified extrema of Takagi graphs over columns.

Grid counting needs, for every column ``[x0, x1]``, an enclosure of
``min`` and ``max`` of ``f(x) = c + m*x + T_{a,b}(x)``.  The enclosures come
from the half-cell structure of the series.

A level-n half-cell is ``[q/(2 b**n), (q+1)/(2 b**n)]``.  On it the partial sum
``F_{n-1}`` is affine with slope ``sigma`` and, writing ``G = T_{a,b}``,

    f(x) = F(x_left) + sigma*(x - x_left) + a**n * G(b**n x).

With ``s = sigma / (ab)**n`` the extrema over the half-cell are

    even q:  F(x_left) + a**n * H(s)
    odd q:   F(x_left) + a**n * (s/2 + H(-s))

where ``H(t) = max_{u in [0, 1/2]} G(u) + t*u`` (``h`` for the minimum).  ``H``
satisfies the two-branch recursion

    H(t) = max(E(t) + a*H(t'), O(t) + a*H(-t')),   t' = (1 + t) / (ab),

which is resolved by a vectorised branch-and-bound over all distinct slopes.
Columns that are not unions of half-cells are decomposed top-down; partial
cells are refined until their oscillation is below the tolerance.
"""

from __future__ import annotations

import numpy as np

from .core import TakagiParams, evaluate_many
from .exceptions import PrecisionBudgetError

_MAX_NODES = 4_000_000
_MAX_DEPTH = 400


def _g_half(p):
    # G(1/2): only the n = 0 term survives for even b, every term is 1/2 for odd b.
    if p.b % 2 == 0:
        return 0.5
    return p.sup_bound


def _branch_constants(p, t, maximize):
    b = p.b
    qe = b - 1 if (b - 1) % 2 == 0 else b - 2
    qo = b - 1 if (b - 1) % 2 == 1 else b - 2
    pick = np.maximum if maximize else np.minimum
    one_t = 1.0 + t
    even = pick(0.0, one_t * qe / (2 * b))
    odd = pick(one_t * 2 / (2 * b), one_t * (qo + 1) / (2 * b))
    return even, odd


def _bounds(p, t, maximize, g_half):
    """Enclosure of H(t) (maximize) or h(t) (minimize)."""
    half_t = 0.5 * t
    if maximize:
        lo = np.maximum(0.0, g_half + half_t)
        hi = np.maximum(0.0, half_t) + p.sup_bound
    else:
        lo = np.minimum(0.0, half_t)
        hi = np.minimum(0.0, g_half + half_t)
    return lo, hi


def half_extremum(p: TakagiParams, t, maximize=True, delta=1e-12):
    """Enclose ``H(t)`` (or ``h(t)``) for an array of slopes.

    ``delta`` may be a scalar or per-slope array.  Returns ``(lo, hi)`` with
    ``hi - lo <= delta``.
    """
    t0 = np.atleast_1d(np.asarray(t, dtype=float))
    nq = t0.size
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (nq,)).copy()
    g_half = _g_half(p)
    sign = 1.0 if maximize else -1.0

    qid = np.arange(nq)
    const = np.zeros(nq)
    t = t0.copy()
    mult = 1.0
    # Work with score = sign * value so that both cases are maximisations.
    best = np.full(nq, -np.inf)
    for _ in range(_MAX_DEPTH):
        lo, hi = _bounds(p, t, maximize, g_half)
        if maximize:
            node_lo, node_hi = const + mult * lo, const + mult * hi
        else:
            node_lo, node_hi = -(const + mult * hi), -(const + mult * lo)
        np.maximum.at(best, qid, node_lo)
        keep = node_hi > best[qid] + delta[qid]
        if not keep.any():
            break
        qid, const, t = qid[keep], const[keep], t[keep]
        t1 = (1.0 + t) / p.ab
        even, odd = _branch_constants(p, t, maximize)
        qid = np.concatenate([qid, qid])
        const = np.concatenate([const + mult * even, const + mult * odd])
        t = np.concatenate([t1, -t1])
        mult *= p.a
        # Nodes with identical (query, slope) differ only by their constant.
        order = np.lexsort((-sign * const, t, qid))
        qid, const, t = qid[order], const[order], t[order]
        first = np.ones(qid.size, dtype=bool)
        first[1:] = (qid[1:] != qid[:-1]) | (t[1:] != t[:-1])
        qid, const, t = qid[first], const[first], t[first]
        if qid.size > _MAX_NODES:
            raise RuntimeError("extremum search exceeded its node budget")
    else:
        raise RuntimeError("extremum search did not converge")
    if maximize:
        return best, best + delta
    return -best - delta, -best


def _resolve_full_cells(p, level, q, fval, sigma, tol, maximize):
    """Enclosures of the extremum of f over full half-cells."""
    scale = p.a ** np.asarray(level, dtype=float)
    s = sigma / p.ab ** np.asarray(level, dtype=float)
    odd = (q % 2) == 1
    t = np.where(odd, -s, s)
    offset = np.where(odd, 0.5 * s, 0.0)
    # H is 1/2-Lipschitz in t, so rounding slopes to 1e-12 costs < 1e-12.
    key = np.round(t, 12)
    uniq, inv = np.unique(key, return_inverse=True)
    # The per-query accuracy only has to beat tol after scaling by a**level.
    need = np.full(uniq.size, np.inf)
    np.minimum.at(need, inv, 0.25 * tol / scale)
    need = np.minimum(need, 1.0)
    lo, hi = half_extremum(p, uniq, maximize, need)
    slack = 1e-12
    lo = lo[inv] - slack
    hi = hi[inv] + slack
    return fval + scale * (offset + lo), fval + scale * (offset + hi)


def _children(p, level, q, fval, sigma):
    """Expand level-n half-cells into their b level-(n+1) children."""
    b = p.b
    c = np.arange(b)
    q_parity = (q % 2).astype(bool)
    width_child = 1.0 / (2.0 * b ** (level + 1))
    term = np.where(q_parity[:, None], 0.5 - c[None, :] / (2 * b), c[None, :] / (2 * b))
    new_f = fval[:, None] + sigma[:, None] * (c[None, :] * width_child) + p.a**level * term
    new_sigma = sigma + np.where(q_parity, -1.0, 1.0) * p.ab**level
    new_q = q[:, None] * b + c[None, :]
    return (
        new_q.ravel(),
        new_f.ravel(),
        np.repeat(new_sigma, b),
    )


def level_nodes(p: TakagiParams, level, slope=0.0, intercept=0.0):
    """All level-``level`` half-cells of [0, 1] with ``F_{level-1}(x_left)`` and slope."""
    q = np.array([0, 1], dtype=np.int64)
    fval = intercept + slope * np.array([0.0, 0.5])
    sigma = np.full(2, float(slope))
    for n in range(level):
        q, fval, sigma = _children(p, n, q, fval, sigma)
    return q, fval, sigma


def aligned_column_extrema(p: TakagiParams, m, tol):
    """Extrema over each column ``[j/b**m, (j+1)/b**m]`` of [0, 1].

    Returns ``(min_lo, min_hi, max_lo, max_hi)`` arrays of length ``b**m``.
    """
    q, fval, sigma = level_nodes(p, m)
    mx_lo, mx_hi = _resolve_full_cells(p, m, q, fval, sigma, tol, True)
    mn_lo, mn_hi = _resolve_full_cells(p, m, q, fval, sigma, tol, False)
    pair = lambda v, f: f(v[0::2], v[1::2])  # noqa: E731
    return (
        pair(mn_lo, np.minimum),
        pair(mn_hi, np.minimum),
        pair(mx_lo, np.maximum),
        pair(mx_hi, np.maximum),
    )


def _cell_oscillation_bound(p, n, max_slope):
    return max_slope / (2.0 * p.b**n) + p.a**n * p.sup_bound


def max_grid_level(p):
    """Deepest half-cell level whose indices fit comfortably in int64."""
    return int(61 // np.log2(p.b))


def _finest_level(p, tol, slope):
    cap = max_grid_level(p)
    n = 1
    while True:
        max_slope = abs(slope) + sum(p.ab**i for i in range(n))
        if _cell_oscillation_bound(p, n, max_slope) <= 0.25 * tol:
            return n
        n += 1
        if n > cap:
            raise PrecisionBudgetError(
                f"tol={tol:g} needs half-cells finer than level {cap} for a={p.a:g}, b={p.b}"
            )


def interval_extrema(p: TakagiParams, lo, hi, tol, slope=0.0, intercept=0.0):
    """Extrema of ``intercept + slope*x + T_{a,b}(x)`` over each ``[lo[i], hi[i]]``.

    Columns must lie inside [0, 1].  Returns ``(min_lo, min_hi, max_lo, max_hi)``
    where the true minimum lies in ``[min_lo, min_hi]`` and likewise for the
    maximum; every enclosure is at most ``tol`` wide.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    ncol = lo.size
    n_max = _finest_level(p, tol, slope)

    # The endpoints are genuine points of each column.
    ends, err, _ = evaluate_many(p, np.concatenate([lo, hi]), 0.25 * tol)
    ends = ends + intercept + slope * np.concatenate([lo, hi])
    e_lo, e_hi = ends[:ncol], ends[ncol:]
    mx_lo = np.maximum(e_lo, e_hi) - err
    mx_hi = np.maximum(e_lo, e_hi) + err
    mn_lo = np.minimum(e_lo, e_hi) - err
    mn_hi = np.minimum(e_lo, e_hi) + err

    full_parts = []
    col = np.repeat(np.arange(ncol), 2)
    q = np.tile(np.array([0, 1], dtype=np.int64), ncol)
    fval = intercept + slope * np.tile(np.array([0.0, 0.5]), ncol)
    sigma = np.full(q.size, float(slope))
    for n in range(n_max + 1):
        den = 2.0 * p.b**n
        xl = q / den
        xr = (q + 1) / den
        c_lo, c_hi = lo[col], hi[col]
        inside = (xl >= c_lo) & (xr <= c_hi)
        outside = (xr <= c_lo) | (xl >= c_hi)
        partial = ~inside & ~outside
        if inside.any():
            full_parts.append((n, col[inside], q[inside], fval[inside], sigma[inside]))
        if n == n_max:
            if partial.any():
                w = 1.0 / den
                pc = col[partial]
                rise = sigma[partial] * w
                top = fval[partial] + np.maximum(0.0, rise) + p.a**n * p.sup_bound
                bottom = fval[partial] + np.minimum(0.0, rise)
                np.maximum.at(mx_hi, pc, top)
                np.minimum.at(mn_lo, pc, bottom)
            break
        if not partial.any():
            break
        pcol = col[partial]
        q, fval, sigma = _children(p, n, q[partial], fval[partial], sigma[partial])
        col = np.repeat(pcol, p.b)

    for n, c, qq, fv, sg in full_parts:
        lvl = np.full(c.size, n)
        a_lo, a_hi = _resolve_full_cells(p, lvl, qq, fv, sg, tol, True)
        i_lo, i_hi = _resolve_full_cells(p, lvl, qq, fv, sg, tol, False)
        np.maximum.at(mx_lo, c, a_lo)
        np.maximum.at(mx_hi, c, a_hi)
        np.minimum.at(mn_lo, c, i_lo)
        np.minimum.at(mn_hi, c, i_hi)
    return mn_lo, mn_hi, mx_lo, mx_hi
