"""Labeled tile dataset construction.

The study extent is divided into square tiles on an orthogonal grid
(default 150 m).  Per tile we compute the proportion of surface covered by
favela outlines, by vegetation (NDVI threshold) and by buildings, plus an
industrial-presence flag, then remove unusable tiles and assign the binary
class.  Removal and class thresholds live in :class:`LabelRules` and every
one of them is configurable.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

from .errors import DataError
from .geom import MultiPolygon, Raster, Rect, coverage_proportion, pixel_fraction, pixel_mean

logger = logging.getLogger(__name__)

LABEL_FAVELA = "favela"
LABEL_NONFAVELA = "nonfavela"
LABEL_DISCARDED = "discarded"

REASON_BUILDING = "low_building"
REASON_VEGETATION = "high_vegetation"
REASON_INDUSTRIAL = "industrial"

DATASET_HEADER = "row,col,favela_prop,veg_prop,building_prop,industrial,label"


@dataclass(frozen=True)
class TileGrid:
    """Orthogonal analysis grid anchored at a top-left origin (y-down rows)."""

    origin_x: float
    origin_y: float
    tile_size: float
    n_cols: int
    n_rows: int

    def __post_init__(self) -> None:
        if self.tile_size <= 0:
            raise DataError(f"tile_size must be positive, got {self.tile_size}")
        if self.n_cols < 1 or self.n_rows < 1:
            raise DataError(f"grid must have at least one tile, got {self.n_cols}x{self.n_rows}")

    def tiles(self):
        for row in range(self.n_rows):
            for col in range(self.n_cols):
                yield row, col


@dataclass
class TileRecord:
    row: int
    col: int
    favela_prop: float
    veg_prop: float
    building_prop: float
    industrial: bool
    label: str | None = None

    @property
    def tile_id(self) -> tuple[int, int]:
        return (self.row, self.col)


@dataclass(frozen=True)
class LabelRules:
    """Removal filters and class thresholds.

    Removal: building proportion strictly below ``building_min``, vegetation
    proportion strictly above ``veg_max``, or any industrial presence.
    Class: favela iff favela proportion >= ``favela_min`` (inclusive),
    non-favela iff it is exactly zero, discarded otherwise.
    """

    building_min: float = 0.50
    veg_max: float = 0.95
    favela_min: float = 0.70
    ndvi_threshold: float = 0.60

    def __post_init__(self) -> None:
        for name in ("building_min", "veg_max", "favela_min", "ndvi_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DataError(f"{name} must be in [0, 1], got {v}")
        if self.favela_min <= 0:
            raise DataError("favela_min must be positive")


def make_grid(extent: Rect, tile_size: float = 150.0) -> TileGrid:
    """Grid anchored at the extent's top-left corner; edge tiles may extend
    past the extent (counts are rounded up)."""
    if tile_size <= 0:
        raise DataError(f"tile_size must be positive, got {tile_size}")
    # tolerance guards against ceil(3.0000000000000004) inflating the count
    n_cols = math.ceil(extent.width / tile_size - 1e-9)
    n_rows = math.ceil(extent.height / tile_size - 1e-9)
    return TileGrid(extent.min_x, extent.max_y, tile_size, max(n_cols, 1), max(n_rows, 1))


def tile_extent(grid: TileGrid, row: int, col: int) -> Rect:
    """Square extent of tile (row, col); adjacent tiles share edges exactly."""
    if not (0 <= row < grid.n_rows and 0 <= col < grid.n_cols):
        raise IndexError(f"tile ({row}, {col}) outside grid {grid.n_rows}x{grid.n_cols}")
    ts = grid.tile_size
    return Rect(
        grid.origin_x + col * ts,
        grid.origin_y - (row + 1) * ts,
        grid.origin_x + (col + 1) * ts,
        grid.origin_y - row * ts,
    )


def apply_filters(record: TileRecord, rules: LabelRules) -> list[str]:
    """Removal reasons in fixed order (building, vegetation, industrial);
    an empty list means the tile is kept."""
    reasons = []
    if record.building_prop < rules.building_min:
        reasons.append(REASON_BUILDING)
    if record.veg_prop > rules.veg_max:
        reasons.append(REASON_VEGETATION)
    if record.industrial:
        reasons.append(REASON_INDUSTRIAL)
    return reasons


def assign_label(record: TileRecord, rules: LabelRules) -> str:
    """Class of a kept tile; depends on the favela proportion only."""
    if record.favela_prop >= rules.favela_min:
        return LABEL_FAVELA
    if record.favela_prop == 0.0:
        return LABEL_NONFAVELA
    return LABEL_DISCARDED


def compute_tile_stats(
    grid: TileGrid,
    favelas: MultiPolygon,
    ndvi_raster: Raster,
    buildings_raster: Raster,
    industrial_zones: MultiPolygon,
    rules: LabelRules,
    ndvi_band: str = "ndvi",
    buildings_band: str = "buildings",
    threads: int = 1,
) -> tuple[list[TileRecord], list[tuple[int, int]]]:
    """Coverage statistics for every tile, ordered by (row, col).

    Returns ``(records, partially_covered_tiles)``.  Raises when any tile has
    no pixel centers at all in one of the rasters; tiles merely straddling
    the raster edge are computed from the available pixels and reported in
    the second element.
    """

    def one_tile(rc: tuple[int, int]) -> tuple[TileRecord, bool, bool]:
        row, col = rc
        rect = tile_extent(grid, row, col)
        favela_prop = coverage_proportion(favelas, rect)
        veg_prop, n_veg = pixel_fraction(ndvi_raster, ndvi_band, rect, ">=", rules.ndvi_threshold)
        building_prop, n_bld = pixel_mean(buildings_raster, buildings_band, rect)
        industrial = coverage_proportion(industrial_zones, rect) > 0.0
        uncovered = n_veg == 0 or n_bld == 0
        partial = not uncovered and not (
            ndvi_raster.extent().contains(rect) and buildings_raster.extent().contains(rect)
        )
        record = TileRecord(
            row, col, favela_prop, veg_prop, 0.0 if n_bld == 0 else building_prop, industrial
        )
        return record, uncovered, partial

    tiles = list(grid.tiles())
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_tile, tiles))
    else:
        results = [one_tile(rc) for rc in tiles]

    uncovered = [rec.tile_id for rec, unc, _ in results if unc]
    if uncovered:
        shown = ", ".join(str(t) for t in uncovered[:20])
        more = "" if len(uncovered) <= 20 else f" (+{len(uncovered) - 20} more)"
        raise DataError(f"raster does not cover {len(uncovered)} tiles: {shown}{more}")
    partial = [rec.tile_id for rec, _, par in results if par]
    for tid in partial:
        logger.warning("tile %s extends past the raster; statistics use available pixels", tid)
    return [rec for rec, _, _ in results], partial


@dataclass
class LabeledDataset:
    grid: TileGrid
    rules: LabelRules
    records: list[TileRecord]
    provenance: dict

    def labels(self) -> dict[tuple[int, int], str]:
        return {r.tile_id: r.label for r in self.records}

    def class_counts(self) -> dict[str, int]:
        counts = {LABEL_FAVELA: 0, LABEL_NONFAVELA: 0}
        for r in self.records:
            counts[r.label] += 1
        return counts


def build_dataset(
    grid: TileGrid,
    favelas: MultiPolygon,
    ndvi_raster: Raster,
    buildings_raster: Raster,
    industrial_zones: MultiPolygon,
    rules: LabelRules | None = None,
    ndvi_band: str = "ndvi",
    buildings_band: str = "buildings",
    threads: int = 1,
) -> LabeledDataset:
    """Full labeling pass: statistics, filters, class assignment, provenance.

    Output contains only kept tiles with a definite class; everything else is
    accounted for in the provenance summary.  Pure function of its inputs:
    identical results for any ``threads`` value.
    """
    rules = rules or LabelRules()
    records, partial = compute_tile_stats(
        grid, favelas, ndvi_raster, buildings_raster, industrial_zones, rules,
        ndvi_band=ndvi_band, buildings_band=buildings_band, threads=threads,
    )

    removed_counts = {REASON_BUILDING: 0, REASON_VEGETATION: 0, REASON_INDUSTRIAL: 0}
    n_removed = 0
    n_discarded = 0
    kept: list[TileRecord] = []
    for rec in records:
        reasons = apply_filters(rec, rules)
        if reasons:
            n_removed += 1
            for reason in reasons:
                removed_counts[reason] += 1
            continue
        rec.label = assign_label(rec, rules)
        if rec.label == LABEL_DISCARDED:
            n_discarded += 1
            continue
        kept.append(rec)

    n_favela = sum(1 for r in kept if r.label == LABEL_FAVELA)
    n_nonfavela = len(kept) - n_favela
    provenance = {
        "grid": asdict(grid),
        "rules": asdict(rules),
        "tiles_total": grid.n_rows * grid.n_cols,
        "removed": dict(removed_counts),
        "removed_tiles": n_removed,
        "discarded_ambiguous": n_discarded,
        "class_counts": {LABEL_FAVELA: n_favela, LABEL_NONFAVELA: n_nonfavela},
        # imbalance over labeled tiles only; discarded tiles do not count
        "imbalance_ratio": (n_nonfavela / n_favela) if n_favela else None,
        "partial_tiles": len(partial),
    }
    return LabeledDataset(grid, rules, kept, provenance)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def write_dataset_csv(dataset: LabeledDataset, path) -> None:
    lines = [DATASET_HEADER]
    for r in dataset.records:
        lines.append(
            f"{r.row},{r.col},{r.favela_prop!r},{r.veg_prop!r},"
            f"{r.building_prop!r},{'true' if r.industrial else 'false'},{r.label}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_dataset_csv(path, grid: TileGrid | None = None, rules: LabelRules | None = None) -> LabeledDataset:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != DATASET_HEADER:
        raise DataError(f"{path}: expected header {DATASET_HEADER!r}")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 7:
            raise DataError(f"{path}:{lineno}: expected 7 fields, got {len(parts)}")
        row, col = int(parts[0]), int(parts[1])
        label = parts[6]
        if label not in (LABEL_FAVELA, LABEL_NONFAVELA):
            raise DataError(f"{path}:{lineno}: unknown label {label!r}")
        records.append(
            TileRecord(
                row, col, float(parts[2]), float(parts[3]), float(parts[4]),
                parts[5] == "true", label,
            )
        )
    grid = grid or TileGrid(0.0, 0.0, 150.0, 1 + max((r.col for r in records), default=0),
                            1 + max((r.row for r in records), default=0))
    return LabeledDataset(grid, rules or LabelRules(), records, {})


def write_provenance(dataset: LabeledDataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dataset.provenance, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_tiles_geojson(dataset: LabeledDataset, path) -> None:
    """Labeled tile squares with their statistics, for GIS inspection."""
    features = []
    for r in dataset.records:
        rect = tile_extent(dataset.grid, r.row, r.col)
        ring = [
            [rect.min_x, rect.min_y],
            [rect.max_x, rect.min_y],
            [rect.max_x, rect.max_y],
            [rect.min_x, rect.max_y],
            [rect.min_x, rect.min_y],
        ]
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": {
                    "row": r.row,
                    "col": r.col,
                    "favela_prop": r.favela_prop,
                    "veg_prop": r.veg_prop,
                    "building_prop": r.building_prop,
                    "industrial": r.industrial,
                    "label": r.label,
                },
            }
        )
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"type": "FeatureCollection", "features": features}, fh, indent=1, sort_keys=True)
        fh.write("\n")
