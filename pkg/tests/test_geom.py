"""Geometry primitives: hand-frozen cases plus oracle-backed randomized checks."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from favmap.errors import DataError
from favmap.geom import (
    MultiPolygon,
    Polygon,
    PolygonRing,
    Raster,
    Rect,
    clip_polygon_to_rect,
    coverage_proportion,
    ndvi,
    pixel_fraction,
    pixel_mean,
    pixel_values,
    ring_area,
)
from oracles import coverage_oracle, random_convex_polygon, random_star_polygon

UNIT_SQUARE = PolygonRing(((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)))


def square(x0, y0, x1, y1):
    ring = PolygonRing(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))
    return MultiPolygon([Polygon(ring)])


# ---------------------------------------------------------------------------
# rings and areas
# ---------------------------------------------------------------------------


def test_ring_area_ccw_unit_square():
    assert ring_area(UNIT_SQUARE) == 1.0


def test_ring_area_orientation_flip():
    assert ring_area(UNIT_SQUARE.reversed()) == -1.0


def test_ring_area_right_triangle():
    tri = PolygonRing(((0.0, 0.0), (4.0, 0.0), (0.0, 3.0)))
    assert ring_area(tri) == 6.0


def test_ring_validation():
    with pytest.raises(DataError):
        PolygonRing(((0.0, 0.0), (1.0, 0.0)))
    with pytest.raises(DataError):
        PolygonRing(((0.0, 0.0), (0.0, 0.0), (1.0, 1.0)))


def test_ring_cleaned_drops_closing_vertex_and_dupes():
    ring = PolygonRing.cleaned([(0, 0), (1, 0), (1, 0), (1, 1), (0, 1), (0, 0)])
    assert ring.vertices == ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))


def test_polygon_orientation_normalized():
    poly = Polygon(UNIT_SQUARE.reversed(), [PolygonRing(((0.2, 0.2), (0.4, 0.2), (0.4, 0.4), (0.2, 0.4)))])
    assert ring_area(poly.exterior) > 0
    assert all(ring_area(h) < 0 for h in poly.holes)
    assert poly.area() == pytest.approx(1.0 - 0.04)


def test_hole_outside_exterior_rejected():
    hole = PolygonRing(((5.0, 5.0), (6.0, 5.0), (6.0, 6.0), (5.0, 6.0)))
    with pytest.raises(DataError):
        Polygon(UNIT_SQUARE, [hole])


# ---------------------------------------------------------------------------
# clipping
# ---------------------------------------------------------------------------


def test_clip_identity():
    rect = Rect(0, 0, 10, 10)
    mp = square(0, 0, 10, 10)
    out = clip_polygon_to_rect(mp, rect)
    assert out.area() == pytest.approx(100.0)
    assert set(out.polygons[0].exterior.vertices) == set(mp.polygons[0].exterior.vertices)


def test_clip_disjoint_is_empty():
    out = clip_polygon_to_rect(square(20, 20, 30, 30), Rect(0, 0, 10, 10))
    assert out.is_empty()
    assert out.area() == 0.0


def test_clip_abutting_is_empty():
    # shares an edge only: zero area, treated as empty
    out = clip_polygon_to_rect(square(10, 0, 20, 10), Rect(0, 0, 10, 10))
    assert out.is_empty()


def test_clip_triangle_fully_containing_rect():
    # the triangle x + y <= 10 contains all of [0,5]^2, so nothing is cut
    tri = MultiPolygon([Polygon(PolygonRing(((0.0, 0.0), (10.0, 0.0), (0.0, 10.0))))])
    rect = Rect(0, 0, 5, 5)
    out = clip_polygon_to_rect(tri, rect)
    assert out.area() == pytest.approx(25.0)
    assert abs(out.area() / rect.area - coverage_oracle(tri, rect)) < 1e-3


def test_clip_triangle_cut_by_rect():
    # hypotenuse crosses the square: area = integral of (5 - x/2) = 18.75
    tri = MultiPolygon([Polygon(PolygonRing(((0.0, 0.0), (10.0, 0.0), (0.0, 5.0))))])
    rect = Rect(0, 0, 5, 5)
    out = clip_polygon_to_rect(tri, rect)
    assert out.area() == pytest.approx(18.75, rel=1e-12)
    assert abs(out.area() / rect.area - coverage_oracle(tri, rect)) < 1e-3


def test_clip_keeps_holes():
    outer = PolygonRing(((0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)))
    hole = PolygonRing(((2.0, 2.0), (8.0, 2.0), (8.0, 8.0), (2.0, 8.0)))
    mp = MultiPolygon([Polygon(outer, [hole])])
    out = clip_polygon_to_rect(mp, Rect(0, 0, 5, 5))
    # left-bottom quarter: 25 minus the hole quarter (3x3)
    assert out.area() == pytest.approx(25.0 - 9.0)
    assert len(out.polygons[0].holes) == 1


def test_clip_vertices_stay_inside_rect():
    rng = np.random.default_rng(7)
    rect = Rect(2.0, 3.0, 9.0, 8.0)
    for _ in range(50):
        mp = random_star_polygon(rng, center=(rng.uniform(0, 11), rng.uniform(0, 11)), scale=4.0)
        out = clip_polygon_to_rect(mp, rect)
        for poly in out.polygons:
            for ring in [poly.exterior, *poly.holes]:
                for x, y in ring.vertices:
                    assert rect.min_x - 1e-9 <= x <= rect.max_x + 1e-9
                    assert rect.min_y - 1e-9 <= y <= rect.max_y + 1e-9


def test_clip_area_never_exceeds_either_input():
    rng = np.random.default_rng(13)
    rect = Rect(0.0, 0.0, 10.0, 10.0)
    for _ in range(50):
        mp = random_convex_polygon(rng, center=(rng.uniform(-2, 12), rng.uniform(-2, 12)), scale=3.0)
        clipped = clip_polygon_to_rect(mp, rect).area()
        assert clipped <= min(mp.area(), rect.area) + 1e-6


# ---------------------------------------------------------------------------
# coverage
# ---------------------------------------------------------------------------


def test_coverage_full_and_disjoint():
    rect = Rect(0, 0, 10, 10)
    assert coverage_proportion(square(-5, -5, 15, 15), rect) == 1.0
    assert coverage_proportion(square(20, 20, 30, 30), rect) == 0.0


def test_coverage_left_half():
    rect = Rect(0, 0, 10, 10)
    assert coverage_proportion(square(0, 0, 5, 10), rect) == pytest.approx(0.5)


def test_coverage_monotone_under_disjoint_addition():
    rng = np.random.default_rng(3)
    rect = Rect(0, 0, 10, 10)
    for _ in range(30):
        mp = random_convex_polygon(rng, center=(rng.uniform(0, 10), rng.uniform(0, 10)), scale=2.0)
        extra = random_convex_polygon(rng, center=(rng.uniform(3, 7) + 100.0, 5.0), scale=2.0)
        base = coverage_proportion(mp, rect)
        combined = coverage_proportion(MultiPolygon(mp.polygons + extra.polygons), rect)
        assert combined >= base - 1e-12


def test_coverage_matches_oracle_on_concave_fixtures():
    rng = np.random.default_rng(42)
    rect = Rect(0.0, 0.0, 10.0, 10.0)
    for _ in range(25):
        mp = random_star_polygon(rng, center=(rng.uniform(1, 9), rng.uniform(1, 9)), scale=5.0)
        got = coverage_proportion(mp, rect)
        want = coverage_oracle(mp, rect)
        assert abs(got - want) < 1e-3


def test_coverage_zero_area_rect_rejected():
    with pytest.raises(DataError):
        Rect(0, 0, 0, 10)


# ---------------------------------------------------------------------------
# ndvi
# ---------------------------------------------------------------------------


def test_ndvi_basic_values():
    out = ndvi(np.array([[0.2]]), np.array([[0.8]]))
    assert out[0, 0] == pytest.approx(0.6)
    assert ndvi(np.array([[0.5]]), np.array([[0.5]]))[0, 0] == 0.0
    assert ndvi(np.array([[0.0]]), np.array([[0.0]]))[0, 0] == 0.0


def test_ndvi_shape_mismatch():
    with pytest.raises(DataError):
        ndvi(np.zeros((2, 2)), np.zeros((3, 3)))


def test_ndvi_propagates_nodata():
    red = np.array([[0.2, -9999.0]])
    nir = np.array([[0.8, 0.5]])
    out = ndvi(red, nir, nodata=-9999.0)
    assert out[0, 0] == pytest.approx(0.6)
    assert out[0, 1] == -9999.0


@given(
    st.lists(st.floats(0.0, 10.0), min_size=1, max_size=16),
    st.lists(st.floats(0.0, 10.0), min_size=1, max_size=16),
)
def test_ndvi_bounded_for_nonnegative_inputs(red_vals, nir_vals):
    m = min(len(red_vals), len(nir_vals))
    red = np.array(red_vals[:m])
    nir = np.array(nir_vals[:m])
    out = ndvi(red, nir)
    assert np.all(out >= -1.0) and np.all(out <= 1.0)


# ---------------------------------------------------------------------------
# pixel predicates
# ---------------------------------------------------------------------------


def test_pixel_fraction_uniform(flat_raster):
    rect = Rect(0.0, -10.0, 10.0, 0.0)
    frac, n = pixel_fraction(flat_raster, "a", rect, ">=", 0.6)
    assert (frac, n) == (1.0, 100)
    frac, _ = pixel_fraction(flat_raster, "b", rect, ">=", 0.6)
    assert frac == 0.0


def test_pixel_fraction_checkerboard():
    board = np.indices((10, 10)).sum(axis=0) % 2
    raster = Raster(0.0, 0.0, 1.0, {"chk": board.astype(float)})
    frac, n = pixel_fraction(raster, "chk", Rect(0.0, -10.0, 10.0, 0.0), ">=", 0.6)
    assert frac == 0.5 and n == 100


def test_pixel_fraction_unknown_band(flat_raster):
    with pytest.raises(DataError, match="unknown band"):
        pixel_fraction(flat_raster, "nope", Rect(0, -1, 1, 0), ">=", 0.5)


def test_pixel_fraction_empty_window_warns_via_zero(flat_raster):
    frac, n = pixel_fraction(flat_raster, "a", Rect(100.0, 100.0, 110.0, 110.0), ">=", 0.5)
    assert (frac, n) == (0.0, 0)


def test_pixel_fraction_half_open_edges():
    raster = Raster(0.0, 0.0, 1.0, {"v": np.arange(4.0).reshape(2, 2)})
    # rect covering only the left column: centers at x = 0.5
    frac, n = pixel_fraction(raster, "v", Rect(0.0, -2.0, 1.0, 0.0), ">=", 0.0)
    assert n == 2
    # shifting the rect so its max_x sits exactly on the centers excludes them
    frac, n = pixel_fraction(raster, "v", Rect(-0.5, -2.0, 0.5, 0.0), ">=", 0.0)
    assert n == 0


def test_pixel_fraction_complement_sums_to_one(flat_raster):
    rng = np.random.default_rng(5)
    raster = Raster(0.0, 0.0, 1.0, {"x": rng.uniform(0, 1, (10, 10))})
    rect = Rect(2.0, -7.0, 8.0, -1.0)
    ge, n = pixel_fraction(raster, "x", rect, ">=", 0.5)
    lt, m = pixel_fraction(raster, "x", rect, "<", 0.5)
    assert n == m > 0
    assert ge + lt == pytest.approx(1.0)


def test_pixel_values_respects_nodata():
    band = np.array([[1.0, -1.0], [2.0, 3.0]])
    raster = Raster(0.0, 0.0, 1.0, {"v": band}, nodata=-1.0)
    vals = pixel_values(raster, "v", Rect(0.0, -2.0, 2.0, 0.0))
    assert sorted(vals.tolist()) == [1.0, 2.0, 3.0]


def test_pixel_mean():
    raster = Raster(0.0, 0.0, 1.0, {"v": np.array([[1.0, 3.0]])})
    mean, n = pixel_mean(raster, "v", Rect(0.0, -1.0, 2.0, 0.0))
    assert (mean, n) == (2.0, 2)
    mean, n = pixel_mean(raster, "v", Rect(50.0, 0.0, 60.0, 10.0))
    assert n == 0 and math.isnan(mean)


# ---------------------------------------------------------------------------
# oracle agreement on a random mixed batch (small version of the acceptance run)
# ---------------------------------------------------------------------------


@settings(deadline=None, max_examples=25)
@given(st.integers(0, 10_000))
def test_convex_coverage_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    rect = Rect(0.0, 0.0, 10.0, 10.0)
    mp = random_convex_polygon(rng, center=(rng.uniform(-2, 12), rng.uniform(-2, 12)), scale=3.0)
    assert abs(coverage_proportion(mp, rect) - coverage_oracle(mp, rect)) < 1e-3
