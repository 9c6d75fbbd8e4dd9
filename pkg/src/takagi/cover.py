"""Grid covering counts of Takagi graphs and the dimension estimates built on them.

Counting squares are the cells of a grid aligned to the window: a window of
side ``R`` centred at ``(x, y)`` is split into ``n = R / r'`` columns and rows,
where ``r' = R / floor(R / r)`` is the smallest admissible side not below
``r``.  In every column the graph meets exactly the rows that intersect
``[min f, max f]``, a contiguous run by continuity.  The extrema come from
certified enclosures; counting the outer enclosure means a count can exceed
the true one (by at most two cells per column) but never falls below it.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.spatial import cKDTree

from ._extrema import aligned_column_extrema, interval_extrema
from ._validation import check_positive_int, check_real, check_tol
from .core import TakagiParams, evaluate, evaluate_many
from .exceptions import PrecisionBudgetError, ValidationError

PROBE_BITS = 28
MICROSET_BITS = 48


# --------------------------------------------------------------------------
# Records
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Window:
    center: tuple
    R: float

    def __post_init__(self):
        x, y = (check_real(v, "center") for v in self.center)
        object.__setattr__(self, "center", (x, y))
        if not check_real(self.R, "R") > 0:
            raise ValidationError(f"window side must be positive, got {self.R!r}")

    @property
    def x_range(self):
        return self.center[0] - 0.5 * self.R, self.center[0] + 0.5 * self.R

    @property
    def y_range(self):
        return self.center[1] - 0.5 * self.R, self.center[1] + 0.5 * self.R


@dataclass(frozen=True)
class CoverRecord:
    window: Window
    r: float
    r_adjusted: float
    count: int
    theta: float | None = None

    @property
    def cells_per_side(self):
        return int(round(self.window.R / self.r_adjusted))

    def as_row(self):
        return [
            self.window.center[0],
            self.window.center[1],
            self.window.R,
            self.r,
            self.r_adjusted,
            self.count,
            self.theta,
        ]


@dataclass(frozen=True)
class FitReport:
    points: tuple
    slope: float
    intercept: float
    residual: float
    records: tuple = ()

    @property
    def n_points(self):
        return len(self.points)


def _fit(points, records=()):
    if len(points) < 2:
        raise ValidationError("a fit needs at least two scales")
    xs = np.array([p[0] for p in points])
    ys = np.array([p[1] for p in points])
    if np.ptp(xs) == 0:
        raise ValidationError("all scales coincide; cannot fit a slope")
    (slope, intercept), res, *_ = np.polyfit(xs, ys, 1, full=True)
    residual = float(math.sqrt(res[0] / len(xs))) if res.size else 0.0
    return FitReport(
        points=tuple((float(x), float(y)) for x, y in points),
        slope=float(slope),
        intercept=float(intercept),
        residual=residual,
        records=tuple(records),
    )


def adjust_scale(R, r):
    """``(r', n)`` with ``r' = R / floor(R / r)`` and ``n = R / r'``."""
    if not 0 < r < R:
        raise ValidationError(f"need 0 < r < R, got r={r!r}, R={R!r}")
    n = int(math.floor(R / r * (1 + 1e-12)))
    return R / n, n


# --------------------------------------------------------------------------
# Graph sources
# --------------------------------------------------------------------------


class TakagiGraph:
    """Graph of ``intercept + slope*x + T_{a,b}(x)`` over [0, 1]."""

    def __init__(self, params: TakagiParams, slope=0.0, intercept=0.0):
        self.params = params
        self.slope = float(slope)
        self.intercept = float(intercept)

    def value(self, x, tol=1e-12):
        v, _, _ = evaluate_many(self.params, np.atleast_1d(x), tol)
        return v + self.intercept + self.slope * np.atleast_1d(x)

    def extrema(self, lo, hi, tol):
        return interval_extrema(self.params, lo, hi, tol, self.slope, self.intercept)

    def plus_affine(self, slope, intercept=0.0):
        return TakagiGraph(self.params, self.slope + slope, self.intercept + intercept)


class AffineGraph:
    """Graph of ``intercept + slope*x``; a constant when ``slope == 0``."""

    def __init__(self, slope=0.0, intercept=0.0):
        self.slope = float(slope)
        self.intercept = float(intercept)

    def value(self, x, tol=0.0):
        return self.intercept + self.slope * np.atleast_1d(np.asarray(x, dtype=float))

    def extrema(self, lo, hi, tol):
        a = self.intercept + self.slope * np.asarray(lo, dtype=float)
        b = self.intercept + self.slope * np.asarray(hi, dtype=float)
        mn, mx = np.minimum(a, b), np.maximum(a, b)
        return mn, mn, mx, mx

    def plus_affine(self, slope, intercept=0.0):
        return AffineGraph(self.slope + slope, self.intercept + intercept)


def _as_graph(source):
    if isinstance(source, TakagiParams):
        return TakagiGraph(source)
    if hasattr(source, "extrema"):
        return source
    raise ValidationError(f"not a graph source: {source!r}")


# --------------------------------------------------------------------------
# Counting
# --------------------------------------------------------------------------


def _run_lengths(mn, mx, ybot, rp, n):
    """Rows of an n-row grid starting at ``ybot`` met by ``[mn, mx]`` in each column."""
    top = ybot + n * rp
    hit = (mx >= ybot) & (mn <= top)
    first = np.clip(np.floor((mn - ybot) / rp), 0, n - 1)
    last = np.clip(np.floor((mx - ybot) / rp), 0, n - 1)
    return np.where(hit, last - first + 1, 0).astype(np.int64)


def _column_edges(x0, rp, n):
    edges = x0 + rp * np.arange(n + 1)
    return edges[:-1], edges[1:]


def _check_window(w):
    lo, hi = w.x_range
    if lo < -1e-12 or hi > 1 + 1e-12:
        raise ValidationError(f"window x-range [{lo}, {hi}] leaves [0, 1]")


def grid_count(source, w: Window, r, tol=None, theta=None):
    """Cells of the window's aligned ``r'``-grid met by the graph."""
    graph = _as_graph(source)
    _check_window(w)
    rp, n = adjust_scale(w.R, check_real(r, "r"))
    tol = rp / 100 if tol is None else check_tol(tol)
    if tol > r / 100 * (1 + 1e-9):
        raise ValidationError(f"tol={tol:g} must not exceed r/100")
    x0, _ = w.x_range
    lo, hi = _column_edges(max(x0, 0.0), rp, n)
    hi = np.minimum(hi, 1.0)
    mn_lo, _, _, mx_hi = graph.extrema(lo, hi, tol)
    count = int(_run_lengths(mn_lo, mx_hi, w.y_range[0], rp, n).sum())
    return CoverRecord(window=w, r=float(r), r_adjusted=rp, count=count, theta=theta)


def column_runs(source, w: Window, r, tol=None):
    """Per-column ``(first_row, last_row)`` of met cells; ``-1`` marks empty columns."""
    graph = _as_graph(source)
    _check_window(w)
    rp, n = adjust_scale(w.R, r)
    tol = rp / 100 if tol is None else tol
    lo, hi = _column_edges(w.x_range[0], rp, n)
    mn_lo, _, _, mx_hi = graph.extrema(lo, hi, tol)
    ybot = w.y_range[0]
    hit = (mx_hi >= ybot) & (mn_lo <= ybot + n * rp)
    first = np.clip(np.floor((mn_lo - ybot) / rp), 0, n - 1).astype(int)
    last = np.clip(np.floor((mx_hi - ybot) / rp), 0, n - 1).astype(int)
    return np.where(hit, first, -1), np.where(hit, last, -1)


def box_dim_theoretical(p: TakagiParams):
    return 2.0 + math.log(p.a) / math.log(p.b)


def global_count(p: TakagiParams, m, tol=None):
    """Cells of the ``b**-m`` grid (anchored at the origin) met by the graph over [0, 1]."""
    m = check_positive_int(m, "m")
    r = float(p.b) ** -m
    tol = r / 100 if tol is None else min(tol, r / 100)
    mn_lo, _, _, mx_hi = aligned_column_extrema(p, m, tol)
    runs = np.floor(mx_hi / r) - np.floor(mn_lo / r) + 1
    return int(runs.sum())


def box_dim_fit(p: TakagiParams, depths, tol=None):
    """Slope of log N against log(1/r) for ``r = b**-m``, m in ``depths``."""
    depths = sorted(set(int(m) for m in depths))
    if len(depths) < 3:
        raise ValidationError("box_dim_fit needs at least three depths")
    points = []
    records = []
    for m in depths:
        r = float(p.b) ** -m
        count = global_count(p, m, tol)
        points.append((m * math.log(p.b), math.log(count)))
        records.append(CoverRecord(Window((0.5, 0.5), 1.0), r, r, count))
    return _fit(points, records)


# --------------------------------------------------------------------------
# Localised counting around the level set
# --------------------------------------------------------------------------


def _jitter_offsets(count):
    """Up to ``count`` offsets (in units of R/4) from the 5x5 lattice, nearest first."""
    pts = [(i, j) for i in range(-2, 3) for j in range(-2, 3) if (i, j) != (0, 0)]
    pts.sort(key=lambda t: (t[0] ** 2 + t[1] ** 2, t))
    return [(0, 0)] + pts[:count]


def probe_scales(p: TakagiParams, M, theta=None):
    """``(R, r)`` for the probe at index ``M``: ``R = b**-(M+1)``, ``r = R**(1/theta)``."""
    theta = 1.0 / (1.0 + math.log(p.ab) / math.log(p.b)) if theta is None else theta
    if not 0 < theta < 1:
        raise ValidationError(
            f"theta={theta!r} must lie in (0, 1); with ab = 1 pass an explicit theta"
        )
    R = float(p.b) ** -(M + 1)
    r = R ** (1.0 / theta)
    if math.log2(1.0 / r) > PROBE_BITS:
        raise PrecisionBudgetError(
            f"M={M} needs r={r:.3g}, finer than the 2**-{PROBE_BITS} probe budget"
        )
    return R, r, theta


def probe_centers(p: TakagiParams, c, M, jitter=8):
    """Window centres for index ``M``: level-set points plus a jitter lattice.

    The level-set points are the midpoints of the deepest cells of ``c``,
    which must be at least as deep as ``ceil((M+1)/k)``.  Midpoints of
    shallower cells can sit far from the Cantor set at the window scale.
    """
    depth = math.ceil((M + 1) / c.k)
    if depth > c.depth:
        raise ValidationError(f"M={M} needs a level-set approximation of depth {depth}, got {c.depth}")
    xs = c.midpoints(c.depth)
    ys, _, _ = evaluate_many(p, xs, 1e-13)
    R = float(p.b) ** -(M + 1)
    centers = []
    for i, j in _jitter_offsets(jitter):
        cx = xs + i * R / 4
        cy = ys + j * R / 4
        ok = (cx - R / 2 >= 0) & (cx + R / 2 <= 1)
        centers.append(np.stack([cx[ok], cy[ok]], axis=1))
    return np.concatenate(centers)


_BATCH_COLUMNS = 50_000


def _window_counts(graph, centers, R, rp, n, tol):
    """Counts for many windows of the same size, columns resolved in batches."""
    per = max(1, _BATCH_COLUMNS // n)
    if len(centers) > per:
        return np.concatenate(
            [_window_counts(graph, centers[i : i + per], R, rp, n, tol) for i in range(0, len(centers), per)]
        )
    x0 = centers[:, 0] - R / 2
    steps = rp * np.arange(n + 1)
    edges = x0[:, None] + steps[None, :]
    lo = np.clip(edges[:, :-1], 0.0, 1.0).ravel()
    hi = np.clip(edges[:, 1:], 0.0, 1.0).ravel()
    mn_lo, _, _, mx_hi = graph.extrema(lo, hi, tol)
    ybot = np.repeat(centers[:, 1] - R / 2, n)
    runs = _run_lengths(mn_lo, mx_hi, ybot, rp, n)
    return runs.reshape(len(centers), n).sum(axis=1)


def assouad_probe(p: TakagiParams, c, M_range, jitter=8, theta=None, threads=1):
    """Local covering exponent around the level set.

    For each M the windows of side ``R = b**-(M+1)`` are centred on the
    level-set points of ``c`` (plus ``jitter`` lattice offsets each) and
    counted at ``r = R**(1/theta)``, ``theta = 1/B`` by default.  The slope of
    log(sup count) against log(R/r) is returned.
    """
    M_range = sorted(set(int(m) for m in M_range))
    if len(M_range) < 2:
        raise ValidationError("assouad_probe needs at least two values of M")
    threads = check_positive_int(threads, "threads")
    graph = TakagiGraph(p)

    def one(M):
        R, r, th = probe_scales(p, M, theta)
        rp, n = adjust_scale(R, r)
        centers = probe_centers(p, c, M, jitter)
        if len(centers) == 0:
            raise ValidationError(f"no admissible windows for M={M}")
        counts = _window_counts(graph, centers, R, rp, n, rp / 100)
        best = int(np.argmax(counts))
        w = Window(tuple(centers[best]), R)
        return M, CoverRecord(w, r, rp, int(counts[best]), th)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, M_range))
    else:
        results = [one(M) for M in M_range]
    results.sort(key=lambda t: t[0])
    records = [rec for _, rec in results]
    points = [(math.log(rec.cells_per_side), math.log(rec.count)) for rec in records]
    return _fit(points, records)


# --------------------------------------------------------------------------
# Sum with a Lipschitz function
# --------------------------------------------------------------------------


def sup_count(source, R, r, tol=None):
    """Largest count over windows on the lattice of step ``R/2`` in both directions.

    Horizontal positions run over ``[R/2, 1 - R/2]``; vertical positions cover
    the graph's range with one window of margin.
    """
    graph = _as_graph(source)
    rp, n = adjust_scale(R, r)
    tol = rp / 100 if tol is None else tol
    nx = int(round((1 - R) / (R / 2))) + 1
    cx = R / 2 + (R / 2) * np.arange(nx)
    # Global column extrema on the rp-grid; each window is a slice of them.
    ncol = int(round(1 / rp))
    lo = rp * np.arange(ncol)
    hi = np.minimum(lo + rp, 1.0)
    mn_lo, _, _, mx_hi = graph.extrema(lo, hi, tol)
    ylo = math.floor((mn_lo.min() - R) / (R / 2))
    yhi = math.ceil((mx_hi.max() + R) / (R / 2))
    best = 0
    step = n // 2 if n % 2 == 0 else None
    for i, x in enumerate(cx):
        if step is not None:
            start = i * step
            cmn, cmx = mn_lo[start : start + n], mx_hi[start : start + n]
        else:
            e_lo, e_hi = _column_edges(x - R / 2, rp, n)
            cmn, _, _, cmx = graph.extrema(e_lo, np.minimum(e_hi, 1.0), tol)
        for j in range(ylo, yhi + 1):
            ybot = j * R / 2 - R / 2
            best = max(best, int(_run_lengths(cmn, cmx, ybot, rp, n).sum()))
    return best, rp


def lipschitz_sum_check(f_lipschitz_M, g, w: Window, r, slope=None, intercept=0.0, tol=None):
    """Check the covering inequality for ``f + g`` against ``g``.

    ``f(x) = slope*x + intercept`` with ``|slope| <= M`` (``slope`` defaults
    to ``M``).  Sup counts are taken over the lattice of :func:`sup_count` at
    the window side ``w.R``.
    """
    M = check_real(f_lipschitz_M, "M")
    if M < 0:
        raise ValidationError("the Lipschitz constant must be non-negative")
    slope = M if slope is None else check_real(slope, "slope")
    if abs(slope) > M:
        raise ValidationError(f"|slope|={abs(slope)} exceeds the Lipschitz constant {M}")
    graph = _as_graph(g)
    R = w.R
    rp, n = adjust_scale(R, r)
    if abs(R / rp - n) > 1e-9 * n:
        raise ValidationError("R / r' is not an integer")
    n_g, _ = sup_count(graph, R, r, tol)
    n_fg, _ = sup_count(graph.plus_affine(slope, intercept), R, r, tol)
    rhs = n_g / (M + 2) - (M + 2) / (math.floor(M) + 2) * n
    return n_fg >= rhs


# --------------------------------------------------------------------------
# Microsets
# --------------------------------------------------------------------------


def microset(p: TakagiParams, M, x0, resolution, center_value=None):
    """Rescaled neighbourhood of ``(x0, T(x0))`` rasterised on a ``resolution`` grid.

    The window ``|x - x0| <= b**-(M+1) / 2`` is mapped by
    ``u = (x - x0) b**(M+1)``, ``v = (T(x) - T(x0)) / a**(M+1)`` and clipped
    to ``[-1/2, 1/2]**2``.  Returns the centres of the met raster cells.
    """
    M = check_positive_int(M, "M")
    resolution = check_positive_int(resolution, "resolution", minimum=2)
    bits = (M + 1) * math.log2(p.b) + math.log2(resolution)
    if bits > MICROSET_BITS:
        raise PrecisionBudgetError(f"microset needs {bits:.1f} bits (budget {MICROSET_BITS})")
    x0f = float(x0)
    scale_x = float(p.b) ** -(M + 1)
    scale_y = p.a ** (M + 1)
    if center_value is None:
        center_value = evaluate(p, x0f, 1e-13).value
    u_edges = -0.5 + np.arange(resolution + 1) / resolution
    lo = x0f + u_edges[:-1] * scale_x
    hi = x0f + u_edges[1:] * scale_x
    # T has period 1, so windows poking out of [0, 1] are shifted back.
    shift = np.floor(lo)
    lo, hi = lo - shift, hi - shift
    tol = scale_y / resolution / 100
    mn_lo, _, _, mx_hi = interval_extrema(p, lo, np.minimum(hi, 1.0), tol)
    vmin = (mn_lo - center_value) / scale_y
    vmax = (mx_hi - center_value) / scale_y
    cell = 1.0 / resolution
    runs_first = np.floor((vmin + 0.5) / cell)
    runs_last = np.floor((vmax + 0.5) / cell)
    pts = []
    for i in range(resolution):
        f = max(int(runs_first[i]), 0)
        l = min(int(runs_last[i]), resolution - 1)
        if l < f:
            continue
        rows = np.arange(f, l + 1)
        u = -0.5 + (i + 0.5) * cell
        pts.append(np.stack([np.full(rows.size, u), -0.5 + (rows + 0.5) * cell], axis=1))
    if not pts:
        return np.empty((0, 2))
    return np.concatenate(pts)


def hausdorff_distance(A, B):
    """Exact Hausdorff distance between two finite planar point sets."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.size == 0 or B.size == 0:
        raise ValidationError("Hausdorff distance needs two nonempty sets")
    d_ab, _ = cKDTree(B).query(A)
    d_ba, _ = cKDTree(A).query(B)
    return float(max(d_ab.max(), d_ba.max()))


def periodic_level_point(c):
    """The point of the level set fixed by ``x -> b**k x mod 1``, as an exact fraction.

    It lies in the first stage-1 cell, so every block shift stays in the
    stage-1 pair and the point belongs to the limiting Cantor set.
    """
    b, k = c.params.b, c.k
    den = b**k - 1
    q = int(c.stages[0][0])
    cell_den = 2 * b ** (k - 1)
    for m in range(den):
        x = Fraction(m, den)
        if Fraction(q, cell_den) < x < Fraction(q + 1, cell_den):
            return x
    raise ValidationError("no periodic point inside the first stage-1 cell")


def level_cell_midpoint(c, x, depth):
    """Midpoint of the depth-``depth`` construction cell containing the exact point ``x``."""
    den = 2 * c.params.b ** c.level(depth)
    q = math.floor(Fraction(x) * den)
    return Fraction(2 * q + 1, 2 * den)


def microset_sequence(p: TakagiParams, c, M0, steps, resolution, centers="refined"):
    """Microsets at ``M0, M0+k, ...`` and the distances between neighbours.

    ``centers="periodic"`` zooms into the periodic level-set point itself;
    self-similarity then makes every microset identical.  ``"refined"`` (the
    default) uses, at step i, the midpoint of the construction cell i blocks
    finer than the window scale around that point, so the centres approach
    the level set faster than the windows shrink and the microsets converge
    to the tangent at the periodic point.
    """
    if centers not in ("periodic", "refined"):
        raise ValidationError(f"unknown centre rule {centers!r}")
    steps = check_positive_int(steps, "steps")
    base = periodic_level_point(c)
    Ms = [M0 + i * c.k for i in range(steps + 1)]
    sets = []
    for i, M in enumerate(Ms):
        if centers == "periodic":
            sets.append(microset(p, M, base, resolution, _periodic_value(p, c, base)))
        else:
            x0 = level_cell_midpoint(c, base, math.ceil((M + 1) / c.k) + i)
            sets.append(microset(p, M, x0, resolution))
    dists = [hausdorff_distance(sets[i], sets[i + 1]) for i in range(steps)]
    return Ms, sets, dists


def _periodic_value(p, c, x0):
    # Block sums repeat along the orbit of x0, so T(x0) is a geometric series.
    head = math.fsum(
        p.a**n * min(float((x0 * p.b**n) % 1), 1 - float((x0 * p.b**n) % 1)) for n in range(c.k)
    )
    return head / (1 - p.a**c.k)


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def records_csv(records, header=None):
    buf = io.StringIO()
    if header:
        buf.write(header)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["center_x", "center_y", "R", "r", "r_adjusted", "count", "theta"])
    for rec in records:
        writer.writerow([_fmt(v) for v in rec.as_row()])
    return buf.getvalue()


def fit_csv(report: FitReport, header=None):
    buf = io.StringIO()
    if header:
        buf.write(header)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["slope", "intercept", "residual", "n_points"])
    writer.writerow([_fmt(report.slope), _fmt(report.intercept), _fmt(report.residual), report.n_points])
    return buf.getvalue()
