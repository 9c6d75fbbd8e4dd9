import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import PHI
from takagi import cover
from takagi.core import TakagiParams, evaluate, evaluate_many
from takagi.cover import AffineGraph, TakagiGraph, Window, grid_count
from takagi.exceptions import PrecisionBudgetError, ValidationError
from takagi.levelset import build
from takagi.littlewood import certify


@pytest.fixture(scope="module")
def golden_approx(golden):
    return build(golden, certify(PHI, 8), 3)


@pytest.fixture(scope="module")
def golden_probe(golden, golden_approx):
    return cover.assouad_probe(golden, golden_approx, range(2, 7))


# -- windows and scales -----------------------------------------------------------


def test_window_validation():
    with pytest.raises(ValidationError):
        Window((0.5, 0.5), 0)
    w = Window((0.5, 0.25), 0.5)
    assert w.x_range == (0.25, 0.75) and w.y_range == (0.0, 0.5)


@pytest.mark.parametrize("R,r,expected", [(1.0, 0.3, (1 / 3, 3)), (0.5, 0.5 / 8, (0.5 / 8, 8)), (1.0, 0.26, (1 / 3, 3))])
def test_adjust_scale(R, r, expected):
    rp, n = cover.adjust_scale(R, r)
    assert rp == pytest.approx(expected[0]) and n == expected[1]
    assert rp >= r


def test_adjust_scale_rejects_r_not_below_R():
    for r in (1.0, 2.0, 0.0):
        with pytest.raises(ValidationError):
            cover.adjust_scale(1.0, r)


# -- grid counting -------------------------------------------------------------------


def test_constant_function_one_cell_per_column():
    rec = grid_count(AffineGraph(0.0, 0.0), Window((0.5, 0.0), 0.5), 0.5 / 8)
    assert rec.count == 8
    assert rec.cells_per_side == 8


def test_window_below_graph_is_empty(classical):
    assert grid_count(classical, Window((0.5, -2.0), 0.5), 0.05).count == 0


def test_grid_count_rejections(classical):
    with pytest.raises(ValidationError):
        grid_count(classical, Window((0.5, 0.5), 0.5), 0.5)
    with pytest.raises(ValidationError):
        grid_count(classical, Window((0.1, 0.5), 0.5), 0.01)
    with pytest.raises(ValidationError):
        grid_count(classical, Window((0.5, 0.5), 0.5), 0.01, tol=1e-3)
    with pytest.raises(ValidationError):
        grid_count("not a graph", Window((0.5, 0.5), 0.5), 0.01)


def _dense_cells(p, r, res_bits=12):
    """Cells of the r-grid on the unit square hit by samples at spacing 2**-res_bits."""
    xs = np.arange(2**res_bits + 1) / 2**res_bits
    ys, _, _ = evaluate_many(p, xs, 1e-12)
    n = int(round(1 / r))
    cols = np.minimum(np.floor(xs / r), n - 1).astype(int)
    rows = np.floor(ys / r).astype(int)
    return {(c, q) for c, q in zip(cols, rows) if 0 <= q < n}


def test_classical_matches_dense_oracle_within_padding(classical):
    r = 2.0**-6
    w = Window((0.5, 0.5), 1.0)
    rec = grid_count(classical, w, r)
    oracle = _dense_cells(classical, r)
    first, last = cover.column_runs(classical, w, r)
    for col in range(64):
        rows = [q for c, q in oracle if c == col]
        # Every sampled cell lies inside our run for that column.
        assert first[col] <= min(rows) and max(rows) <= last[col]
        # The padded run exceeds the sampled span by at most two cells.
        assert (last[col] - first[col] + 1) - (max(rows) - min(rows) + 1) <= 2
    assert len(oracle) <= rec.count <= len(oracle) + 2 * 64
    assert rec.count == 246 and len(oracle) == 184


@given(
    cx=st.floats(0.3, 0.7),
    cy=st.floats(0.0, 0.7),
    small=st.sampled_from([0.125, 0.25]),
)
def test_enlarging_window_never_decreases_count(golden, cx, cy, small):
    r = small / 16
    a = grid_count(golden, Window((cx, cy), small), r).count
    b = grid_count(golden, Window((cx, cy), 2 * small), r).count
    assert b >= a


def test_per_column_contiguity_and_containment(golden):
    w = Window((0.4, 0.6), 0.25)
    r = 0.25 / 64
    first, last = cover.column_runs(golden, w, r)
    xs = w.x_range[0] + (np.arange(64)[:, None] + np.linspace(0, 1, 50)[None, :]) * r * (1 - 1e-9)
    ys, _, _ = evaluate_many(golden, xs.ravel(), 1e-12)
    rows = np.floor((ys.reshape(64, 50) - w.y_range[0]) / r)
    for i in range(64):
        inside = rows[i][(rows[i] >= 0) & (rows[i] < 64)]
        if inside.size:
            assert first[i] >= 0 and first[i] <= inside.min() and inside.max() <= last[i]
            # A run is one contiguous block; a gap would need a missing sampled row.
            assert set(range(int(inside.min()), int(inside.max()) + 1)) <= set(range(first[i], last[i] + 1))


def test_count_bounded_by_cells(golden):
    rec = grid_count(golden, Window((0.5, 0.5), 0.5), 0.5 / 40)
    n = rec.cells_per_side
    assert rec.count <= (n + 1) ** 2
    assert rec.r_adjusted >= rec.r


def _ball_count(p, w, r):
    """Grid-point balls of radius r that meet densely sampled graph points."""
    n = int(round(w.R / r))
    xs = np.linspace(*w.x_range, 40 * n + 1)
    ys, _, _ = evaluate_many(p, xs, 1e-12)
    gx = w.x_range[0] + r * np.arange(n + 1)
    gy = w.y_range[0] + r * np.arange(n + 1)
    hit = 0
    for x in gx:
        near = np.abs(xs - x) <= r
        if not near.any():
            continue
        d = np.hypot(xs[near][:, None] - x, ys[near][:, None] - gy[None, :]).min(axis=0)
        hit += int((d <= r).sum())
    return hit


@pytest.mark.parametrize("cx,cy", [(0.5, 0.6), (0.3, 0.5), (0.7, 0.55)])
def test_square_and_ball_counts_comparable(golden, cx, cy):
    w = Window((cx, cy), 0.25)
    r = 0.25 / 32
    sq = grid_count(golden, w, r).count
    ball = _ball_count(golden, w, r)
    assert sq > 0 and ball > 0
    assert 1 / 4 <= sq / ball <= 4


def test_grid_count_is_deterministic(golden):
    w = Window((0.37, 0.61), 0.2)
    a = grid_count(golden, w, 0.2 / 50)
    b = grid_count(TakagiGraph(golden), w, 0.2 / 50)
    assert a == b


# -- box dimension ---------------------------------------------------------------------


def test_box_dim_theoretical(classical, golden):
    assert cover.box_dim_theoretical(classical) == 1.0
    assert cover.box_dim_theoretical(golden) == 2 + math.log(golden.a) / math.log(8)


def test_box_dim_fit_classical(classical):
    rep = cover.box_dim_fit(classical, range(4, 16))
    assert rep.slope == pytest.approx(1.0, abs=0.05)
    assert rep.slope == pytest.approx(1.0455431364743892, abs=1e-12)
    assert rep.n_points == 12


def test_box_dim_fit_golden(golden):
    rep = cover.box_dim_fit(golden, range(2, 8))
    assert rep.slope == pytest.approx(1.2314, abs=0.05)
    assert rep.slope == pytest.approx(1.2008585243645915, abs=1e-12)


def test_box_dim_fit_needs_three_depths(golden):
    with pytest.raises(ValidationError):
        cover.box_dim_fit(golden, [2, 3])


def test_global_count_agrees_with_grid_count(golden):
    # Same grid through two extrema kernels; each may pad differently.
    m = 2
    aligned = cover.global_count(golden, m)
    windowed = grid_count(golden, Window((0.5, 0.5), 1.0), 8.0**-m).count
    dense = len(_dense_cells(golden, 8.0**-m))
    assert dense <= min(aligned, windowed)
    assert abs(aligned - windowed) <= 2 * 8**m


# -- probe -------------------------------------------------------------------------------


def test_probe_scales(golden, classical):
    R, r, theta = cover.probe_scales(golden, 2)
    assert R == 8.0**-3
    assert r == pytest.approx(R**golden.B)
    assert r == pytest.approx((golden.a * 64) ** -3)
    with pytest.raises(PrecisionBudgetError):
        cover.probe_scales(golden, 7)
    with pytest.raises(ValidationError):
        cover.probe_scales(classical, 2)
    assert cover.probe_scales(classical, 2, theta=0.5)[1] == pytest.approx(2.0**-6)


def test_probe_regression_fixture(golden_probe):
    assert golden_probe.slope == pytest.approx(1.43888034862097, abs=1e-9)
    assert [rec.count for rec in golden_probe.records] == [9, 19, 64, 108, 138]
    assert golden_probe.slope >= 1.30


def test_probe_counts_at_least_coarsest(golden, golden_probe):
    for rec in golden_probe.records:
        coarse = grid_count(golden, rec.window, rec.window.R / 2).count
        assert rec.count >= min(coarse, 1)
        # One r'-cell per column is the least a graph over the full width can meet.
        assert rec.count >= rec.cells_per_side


def test_probe_threads_agree(golden, golden_approx, golden_probe):
    again = cover.assouad_probe(golden, golden_approx, range(2, 7), threads=3)
    assert again.slope == golden_probe.slope
    assert again.records == golden_probe.records


def test_probe_single_M_rejected(golden, golden_approx):
    with pytest.raises(ValidationError):
        cover.assouad_probe(golden, golden_approx, [3])


def test_probe_needs_deep_enough_approx(golden):
    shallow = build(golden, certify(PHI, 8), 1)
    with pytest.raises(ValidationError):
        cover.assouad_probe(golden, shallow, [2, 3, 4])


def test_probe_centres_sit_on_level_set(golden, golden_approx):
    pts = cover.probe_centers(golden, golden_approx, 2, jitter=0)
    assert len(pts) == 128
    assert np.max(np.abs(pts[:, 1] - golden_approx.level_value)) < 1e-6


# -- Lipschitz sums -----------------------------------------------------------------------


def test_lipschitz_zero_function(classical):
    assert cover.lipschitz_sum_check(0.0, classical, Window((0.5, 0.5), 2.0**-3), 2.0**-6)


def test_lipschitz_identity_on_classical(classical):
    assert cover.lipschitz_sum_check(1.0, classical, Window((0.5, 0.5), 2.0**-3), 2.0**-6)


def test_lipschitz_rejects_bad_slope(classical):
    w = Window((0.5, 0.5), 0.25)
    with pytest.raises(ValidationError):
        cover.lipschitz_sum_check(1.0, classical, w, 2.0**-5, slope=2.0)
    with pytest.raises(ValidationError):
        cover.lipschitz_sum_check(-1.0, classical, w, 2.0**-5)


@pytest.mark.parametrize("name", ["classical", "golden"])
def test_lipschitz_random_sweep(name, request):
    p = request.getfixturevalue(name)
    rng = np.random.default_rng(0)
    for _ in range(100 if name == "classical" else 30):
        M = float(rng.uniform(0, 4))
        i = int(rng.integers(1, 5))
        j = int(rng.integers(i + 1, i + 5))
        slope = float(rng.uniform(-M, M))
        w = Window((0.5, 0.5), 2.0**-i)
        assert cover.lipschitz_sum_check(M, p, w, 2.0**-j, slope=slope, intercept=float(rng.uniform(-1, 1)))


def test_sup_count_translation_invariance(classical):
    # A vertical shift only moves windows, and the lattice spans the whole range.
    base, _ = cover.sup_count(classical, 0.25, 0.25 / 16)
    shifted, _ = cover.sup_count(TakagiGraph(classical, 0.0, 0.125), 0.25, 0.25 / 16)
    assert base == shifted


# -- Hausdorff distance --------------------------------------------------------------------


def test_hausdorff_examples():
    A = np.random.default_rng(0).random((50, 2))
    assert cover.hausdorff_distance(A, A) == 0
    assert cover.hausdorff_distance([(0, 0)], [(1, 0)]) == 1
    eps = 1e-3
    extra = A[0] + np.array([eps, 0])
    assert cover.hausdorff_distance(A, np.vstack([A, extra])) <= eps + 1e-15
    with pytest.raises(ValidationError):
        cover.hausdorff_distance(A, np.empty((0, 2)))


@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=20),
       st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=20))
def test_hausdorff_against_brute_force(A, B):
    A, B = np.array(A), np.array(B)
    D = np.hypot(A[:, None, 0] - B[None, :, 0], A[:, None, 1] - B[None, :, 1])
    expected = max(D.min(axis=1).max(), D.min(axis=0).max())
    assert cover.hausdorff_distance(A, B) == pytest.approx(expected, abs=1e-12)
    assert cover.hausdorff_distance(A, B) == cover.hausdorff_distance(B, A)


# -- microsets ------------------------------------------------------------------------------


def _columns_meeting_square(p, M, x0, res, samples=64):
    """Raster columns in which sampled graph points land inside the clipped square."""
    width = float(p.b) ** -(M + 1)
    u = -0.5 + (np.arange(res)[:, None] + (np.arange(samples)[None, :] + 0.5) / samples) / res
    xs = (x0 + u * width) % 1.0
    ys, _, _ = evaluate_many(p, xs.ravel(), 1e-13)
    v = (ys.reshape(res, samples) - evaluate(p, x0, 1e-13).value) / p.a ** (M + 1)
    return set(np.nonzero((np.abs(v) <= 0.5).any(axis=1))[0])


def _present_columns(pts, res):
    return set(np.round((pts[:, 0] + 0.5) * res - 0.5).astype(int))


def test_microset_projection_covers_every_visible_column(golden, golden_approx):
    # Clipping drops columns where the graph leaves the square; all others appear.
    x0 = float(golden_approx.midpoints(2)[0])
    pts = cover.microset(golden, 3, x0, 128)
    expected = _columns_meeting_square(golden, 3, x0, 128)
    assert len(expected) > 64
    assert expected <= _present_columns(pts, 128)
    assert np.all(np.abs(pts) <= 0.5)


def test_microset_at_periodic_point_is_nearly_full_width(golden, golden_approx):
    Ms, sets, _ = cover.microset_sequence(golden, golden_approx, 2, 2, 256, centers="periodic")
    for s in sets:
        assert len(np.unique(s[:, 0])) >= 250


def test_microset_at_zero_is_valid(golden):
    pts = cover.microset(golden, 2, 0.0, 64)
    assert len(pts) > 0
    assert _columns_meeting_square(golden, 2, 0.0, 64) <= _present_columns(pts, 64)


def test_microset_precision_budget(golden):
    with pytest.raises(PrecisionBudgetError):
        cover.microset(golden, 15, 0.3, 512)


def test_periodic_point_is_fixed(golden_approx):
    x = cover.periodic_level_point(golden_approx)
    assert x == pytest.approx(4 / 511) and (x * 8**3) % 1 == x


def test_periodic_microsets_coincide(golden, golden_approx):
    _, _, dists = cover.microset_sequence(golden, golden_approx, 2, 3, 256, centers="periodic")
    assert dists == [0.0, 0.0, 0.0]


def test_refined_microsets_converge(golden, golden_approx):
    Ms, sets, dists = cover.microset_sequence(golden, golden_approx, 2, 3, 512)
    assert Ms == [2, 5, 8, 11]
    assert dists == pytest.approx([0.5293112890103782, 0.004367320268554277, 0.001953125], abs=1e-12)
    assert all(d2 < d1 for d1, d2 in zip(dists, dists[1:]))


def test_microset_sequence_rejects_unknown_rule(golden, golden_approx):
    with pytest.raises(ValidationError):
        cover.microset_sequence(golden, golden_approx, 2, 1, 64, centers="random")


def test_microset_centre_value_is_recentred(golden):
    x0 = 0.3
    pts = cover.microset(golden, 2, x0, 64, center_value=evaluate(golden, x0, 1e-13).value)
    centre = pts[np.abs(pts[:, 0]) < 1 / 64]
    assert np.min(np.abs(centre[:, 1])) < 2 / 64


# -- CSV -------------------------------------------------------------------------------------


def test_records_and_fit_csv(golden_probe):
    text = cover.records_csv(golden_probe.records, header="# h\n")
    lines = text.splitlines()
    assert lines[0] == "# h"
    assert lines[1] == "center_x,center_y,R,r,r_adjusted,count,theta"
    assert len(lines) == 2 + 5
    row = lines[2].split(",")
    assert row[5] == "9" and float(row[2]) == 8.0**-3
    fit = cover.fit_csv(golden_probe).splitlines()
    assert fit[0] == "slope,intercept,residual,n_points"
    assert float(fit[1].split(",")[0]) == golden_probe.slope
    assert fit[1].split(",")[3] == "5"
