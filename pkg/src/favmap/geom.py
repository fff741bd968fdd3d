"""Geometry and raster primitives.

All coordinates are projected map coordinates in meters (one shared CRS,
never geographic degrees).  Rasters follow the usual north-up convention:
``(origin_x, origin_y)`` is the top-left corner and row indices grow
downward, i.e. toward decreasing y.

Pixel membership uses a half-open rule: a pixel belongs to a rectangle iff
its center satisfies ``min_x <= cx < max_x`` and ``min_y <= cy < max_y``,
so a pixel on a shared tile edge is counted exactly once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

Point = tuple[float, float]


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle, e.g. the spatial extent of one grid tile."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self) -> None:
        if not (self.max_x > self.min_x and self.max_y > self.min_y):
            raise DataError(f"degenerate rect: {self}")

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y

    @property
    def area(self) -> float:
        return self.width * self.height

    def intersects(self, other: "Rect") -> bool:
        return not (
            other.max_x <= self.min_x
            or other.min_x >= self.max_x
            or other.max_y <= self.min_y
            or other.min_y >= self.max_y
        )

    def contains(self, other: "Rect") -> bool:
        return (
            other.min_x >= self.min_x
            and other.max_x <= self.max_x
            and other.min_y >= self.min_y
            and other.max_y <= self.max_y
        )


@dataclass(frozen=True)
class PolygonRing:
    """Implicitly closed vertex loop (last vertex connects back to first)."""

    vertices: tuple[Point, ...]

    def __post_init__(self) -> None:
        if len(self.vertices) < 3:
            raise DataError(f"ring needs >= 3 vertices, got {len(self.vertices)}")
        n = len(self.vertices)
        for i in range(n):
            if self.vertices[i] == self.vertices[(i + 1) % n]:
                raise DataError(f"ring has identical consecutive vertices at index {i}")

    @classmethod
    def cleaned(cls, vertices) -> "PolygonRing":
        """Build a ring from messy input: drops an explicit closing vertex
        and collapses runs of identical consecutive points."""
        pts = [(float(x), float(y)) for x, y in vertices]
        if len(pts) > 1 and pts[0] == pts[-1]:
            pts = pts[:-1]
        out: list[Point] = []
        for p in pts:
            if not out or p != out[-1]:
                out.append(p)
        while len(out) > 1 and out[0] == out[-1]:
            out.pop()
        return cls(tuple(out))

    def reversed(self) -> "PolygonRing":
        return PolygonRing(tuple(reversed(self.vertices)))

    def bounds(self) -> Rect:
        xs = [p[0] for p in self.vertices]
        ys = [p[1] for p in self.vertices]
        return Rect(min(xs), min(ys), max(xs), max(ys))


def ring_area(ring: PolygonRing) -> float:
    """Signed shoelace area; positive for counter-clockwise vertex order."""
    pts = ring.vertices
    n = len(pts)
    terms = []
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        terms.append(x0 * y1 - x1 * y0)
    return 0.5 * math.fsum(terms)


@dataclass
class Polygon:
    """One exterior ring plus zero or more holes.

    Orientation is normalized on construction (exterior counter-clockwise,
    holes clockwise) instead of rejected; real-world vector data is messy.
    """

    exterior: PolygonRing
    holes: list[PolygonRing] = field(default_factory=list)

    def __post_init__(self) -> None:
        if ring_area(self.exterior) < 0:
            self.exterior = self.exterior.reversed()
        self.holes = [h if ring_area(h) < 0 else h.reversed() for h in self.holes]
        outer = self.exterior.bounds()
        for h in self.holes:
            if not outer.contains(h.bounds()):
                raise DataError("hole extends outside its exterior's bounding box")

    def area(self) -> float:
        # holes are clockwise, so their signed areas subtract
        return ring_area(self.exterior) + math.fsum(ring_area(h) for h in self.holes)


@dataclass
class MultiPolygon:
    polygons: list[Polygon] = field(default_factory=list)

    def area(self) -> float:
        return math.fsum(p.area() for p in self.polygons)

    def is_empty(self) -> bool:
        return not self.polygons

    @classmethod
    def from_rects(cls, rects) -> "MultiPolygon":
        polys = []
        for r in rects:
            ring = PolygonRing(
                ((r.min_x, r.min_y), (r.max_x, r.min_y), (r.max_x, r.max_y), (r.min_x, r.max_y))
            )
            polys.append(Polygon(ring))
        return cls(polys)


# ---------------------------------------------------------------------------
# Rectangle clipping (Sutherland-Hodgman against four axis-aligned planes)
# ---------------------------------------------------------------------------


def _clip_half_plane(pts: list[Point], axis: int, bound: float, keep_ge: bool) -> list[Point]:
    # The coordinate along the clip axis is assigned exactly (never
    # interpolated), so axis-aligned inputs clip without rounding error.
    out: list[Point] = []
    n = len(pts)
    for i in range(n):
        cur = pts[i]
        prev = pts[i - 1]
        cur_in = (cur[axis] >= bound) if keep_ge else (cur[axis] <= bound)
        prev_in = (prev[axis] >= bound) if keep_ge else (prev[axis] <= bound)
        if cur_in != prev_in:
            t = (bound - prev[axis]) / (cur[axis] - prev[axis])
            if axis == 0:
                cross = (bound, prev[1] + t * (cur[1] - prev[1]))
            else:
                cross = (prev[0] + t * (cur[0] - prev[0]), bound)
            out.append(cross)
        if cur_in:
            out.append(cur)
    return out


def clip_ring_to_rect(ring: PolygonRing, rect: Rect) -> PolygonRing | None:
    """Clip one ring against a rectangle; None when nothing remains.

    Vertex order (and hence orientation) is preserved.  Degenerate zero-area
    remainders (the ring only touching the rectangle) are treated as empty.
    """
    pts = list(ring.vertices)
    for axis, bound, keep_ge in (
        (0, rect.min_x, True),
        (0, rect.max_x, False),
        (1, rect.min_y, True),
        (1, rect.max_y, False),
    ):
        pts = _clip_half_plane(pts, axis, bound, keep_ge)
        if not pts:
            return None
    dedup: list[Point] = []
    for p in pts:
        if not dedup or p != dedup[-1]:
            dedup.append(p)
    while len(dedup) > 1 and dedup[0] == dedup[-1]:
        dedup.pop()
    if len(dedup) < 3:
        return None
    clipped = PolygonRing(tuple(dedup))
    if ring_area(clipped) == 0.0:
        return None
    return clipped


def clip_polygon_to_rect(mp: MultiPolygon, rect: Rect) -> MultiPolygon:
    """Geometric intersection of a multipolygon with a rectangle.

    Holes are clipped the same way and retained as holes; polygons whose
    exterior vanishes are dropped entirely.  An empty result is valid.
    """
    out: list[Polygon] = []
    for poly in mp.polygons:
        if not rect.intersects(poly.exterior.bounds()):
            continue
        ext = clip_ring_to_rect(poly.exterior, rect)
        if ext is None:
            continue
        holes = []
        for h in poly.holes:
            if not rect.intersects(h.bounds()):
                continue
            ch = clip_ring_to_rect(h, rect)
            if ch is not None:
                holes.append(ch)
        out.append(Polygon(ext, holes))
    return MultiPolygon(out)


def coverage_proportion(mp: MultiPolygon, rect: Rect) -> float:
    """Fraction of ``rect`` covered by ``mp`` (hole areas subtracted).

    Exact polygon clipping plus the shoelace formula, clamped to [0, 1]
    against floating-point overshoot.
    """
    if rect.area <= 0:
        raise DataError("rect has no area")
    covered = clip_polygon_to_rect(mp, rect).area()
    return min(1.0, max(0.0, covered / rect.area))


# ---------------------------------------------------------------------------
# Rasters
# ---------------------------------------------------------------------------


@dataclass
class Raster:
    """In-memory raster: named 2-D float bands over a common pixel grid."""

    origin_x: float
    origin_y: float
    pixel_size: float
    bands: dict[str, np.ndarray]
    nodata: float | None = None

    def __post_init__(self) -> None:
        if self.pixel_size <= 0:
            raise DataError(f"pixel_size must be positive, got {self.pixel_size}")
        if not self.bands:
            raise DataError("raster needs at least one band")
        shapes = {name: b.shape for name, b in self.bands.items()}
        if len(set(shapes.values())) != 1:
            raise DataError(f"bands disagree on shape: {shapes}")
        self.bands = {name: np.asarray(b, dtype=np.float64) for name, b in self.bands.items()}

    @property
    def height(self) -> int:
        return next(iter(self.bands.values())).shape[0]

    @property
    def width(self) -> int:
        return next(iter(self.bands.values())).shape[1]

    @property
    def band_names(self) -> list[str]:
        return list(self.bands)

    def band(self, name: str) -> np.ndarray:
        try:
            return self.bands[name]
        except KeyError:
            raise DataError(
                f"unknown band {name!r}; available: {', '.join(self.bands)}"
            ) from None

    def extent(self) -> Rect:
        return Rect(
            self.origin_x,
            self.origin_y - self.height * self.pixel_size,
            self.origin_x + self.width * self.pixel_size,
            self.origin_y,
        )

    def window(self, rect: Rect) -> tuple[int, int, int, int]:
        """(row0, row1, col0, col1) of pixels whose centers fall in rect
        under the half-open convention; empty windows collapse to zeros."""
        p = self.pixel_size
        j0 = math.ceil((rect.min_x - self.origin_x) / p - 0.5)
        j1 = math.ceil((rect.max_x - self.origin_x) / p - 0.5)
        i0 = math.floor((self.origin_y - rect.max_y) / p - 0.5) + 1
        i1 = math.floor((self.origin_y - rect.min_y) / p - 0.5) + 1
        j0, j1 = max(j0, 0), min(j1, self.width)
        i0, i1 = max(i0, 0), min(i1, self.height)
        if i0 >= i1 or j0 >= j1:
            return 0, 0, 0, 0
        return i0, i1, j0, j1


def _valid_mask(values: np.ndarray, nodata: float | None) -> np.ndarray:
    if nodata is None:
        return np.ones(values.shape, dtype=bool)
    if isinstance(nodata, float) and math.isnan(nodata):
        return ~np.isnan(values)
    return values != nodata


def pixel_values(raster: Raster, band: str, rect: Rect) -> np.ndarray:
    """Values of non-nodata pixels whose centers lie in rect (1-D array)."""
    data = raster.band(band)
    i0, i1, j0, j1 = raster.window(rect)
    block = data[i0:i1, j0:j1].ravel()
    return block[_valid_mask(block, raster.nodata)]


_PREDICATES = {
    ">=": np.greater_equal,
    ">": np.greater,
    "<=": np.less_equal,
    "<": np.less,
}


def pixel_fraction(
    raster: Raster, band: str, rect: Rect, op: str, threshold: float
) -> tuple[float, int]:
    """Fraction of valid in-rect pixels satisfying ``value <op> threshold``.

    Returns ``(fraction, n_valid_pixels)``.  When no pixel center falls in
    the rect the fraction is 0 and ``n_valid_pixels`` is 0, which callers
    should surface as a warning.
    """
    try:
        pred = _PREDICATES[op]
    except KeyError:
        raise DataError(f"unsupported predicate {op!r}; use one of {sorted(_PREDICATES)}") from None
    vals = pixel_values(raster, band, rect)
    if vals.size == 0:
        return 0.0, 0
    return float(np.count_nonzero(pred(vals, threshold))) / vals.size, int(vals.size)


def pixel_mean(raster: Raster, band: str, rect: Rect) -> tuple[float, int]:
    """Mean of valid in-rect pixel values; (nan, 0) when the window is empty."""
    vals = pixel_values(raster, band, rect)
    if vals.size == 0:
        return math.nan, 0
    return float(vals.mean()), int(vals.size)


def ndvi(red: np.ndarray, nir: np.ndarray, nodata: float | None = None) -> np.ndarray:
    """Normalized difference vegetation index, (NIR - R) / (NIR + R).

    Defined as 0 where NIR + R == 0.  Where either input equals the nodata
    sentinel the output is nodata.
    """
    red = np.asarray(red, dtype=np.float64)
    nir = np.asarray(nir, dtype=np.float64)
    if red.shape != nir.shape:
        raise DataError(f"band shapes differ: {red.shape} vs {nir.shape}")
    total = nir + red
    out = np.zeros(red.shape, dtype=np.float64)
    nz = total != 0
    np.divide(nir - red, total, out=out, where=nz)
    if nodata is not None:
        bad = ~(_valid_mask(red, nodata) & _valid_mask(nir, nodata))
        out[bad] = nodata
    return out
