"""Deterministic synthetic city generator.

Produces rasters (red, nir, buildings), favela and industrial polygon
layers, and analytic per-tile ground truth, so the whole pipeline is
testable without any proprietary imagery or survey data.

Exactness design: favela geometry is a union of disjoint axis-aligned
rectangles snapped to pixel edges, and the building band is constant per
tile, so the coverage statistics the pipeline computes are bit-identical to
the generator's truth records.  Vegetation is painted per pixel with NDVI
safely above the 0.6 threshold (0.71 vs 0.14 for urban ground); texture
noise multiplies red and nir by one shared factor, which varies the band
statistics without moving any pixel across the NDVI threshold.

Class separability for the baseline extractor comes from the texture knob:
favela tiles get a different noise standard deviation than everything else.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .dataset import TileGrid, make_grid, tile_extent
from .errors import DataError
from .formats import write_multipolygon, write_raster
from .geom import MultiPolygon, Raster, Rect

_ROLES, _CONTENT = 1, 2  # rng derivation tags

ROLE_FORMAL = "formal"
ROLE_FAVELA = "favela"
ROLE_AMBIGUOUS = "ambiguous"
ROLE_VEG = "veg"
ROLE_SPARSE = "sparse"
ROLE_INDUSTRIAL = "industrial"

EXPECTED_LABEL = {
    ROLE_FORMAL: "nonfavela",
    ROLE_FAVELA: "favela",
    ROLE_AMBIGUOUS: "ambiguous",
    ROLE_VEG: "high_vegetation",
    ROLE_SPARSE: "low_building",
    ROLE_INDUSTRIAL: "industrial",
}

TRUTH_HEADER = "row,col,favela_prop,veg_prop,building_prop,industrial,expected_label"

# base reflectances: urban NDVI = 0.1/0.7, vegetation NDVI = 0.5/0.7
_URBAN_RED, _URBAN_NIR = 0.30, 0.40
_VEG_RED, _VEG_NIR = 0.10, 0.60
_BUILT_DENSE, _BUILT_SPARSE = 0.75, 0.25


@dataclass(frozen=True)
class ScenarioConfig:
    extent: Rect
    pixel_size: float = 5.0
    tile_size: float = 150.0
    n_favelas: int = 4
    favela_texture_std: float = 0.30
    formal_texture_std: float = 0.10
    target_imbalance: float = 30.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.favela_texture_std == self.formal_texture_std:
            raise DataError("favela and formal texture stds must differ (separability knob)")
        if min(self.favela_texture_std, self.formal_texture_std) < 0:
            raise DataError("texture stds must be non-negative")
        if self.target_imbalance < 1:
            raise DataError(f"target_imbalance must be >= 1, got {self.target_imbalance}")
        if self.n_favelas < 0:
            raise DataError(f"n_favelas must be >= 0, got {self.n_favelas}")
        ppt = self.tile_size / self.pixel_size
        if ppt != int(ppt) or int(ppt) < 3:
            raise DataError(
                f"pixel_size must divide tile_size into >= 3 pixels, got {ppt}"
            )


@dataclass
class TruthRecord:
    row: int
    col: int
    favela_prop: float
    veg_prop: float
    building_prop: float
    industrial: bool
    expected_label: str


@dataclass
class Scenario:
    config: ScenarioConfig
    grid: TileGrid
    raster: Raster  # bands: red, nir, buildings
    favelas: MultiPolygon
    industrial: MultiPolygon
    truth: list[TruthRecord]

    def expected_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for t in self.truth:
            counts[t.expected_label] = counts.get(t.expected_label, 0) + 1
        return counts


def _patch_sizes(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def _assign_roles(cfg: ScenarioConfig, grid: TileGrid, gen: np.random.Generator):
    n_tiles = grid.n_rows * grid.n_cols
    n_veg = max(1, round(0.06 * n_tiles))
    n_sparse = max(1, round(0.06 * n_tiles))
    n_industrial = max(1, round(0.03 * n_tiles))
    n_ambiguous = max(1, round(0.02 * n_tiles)) if cfg.n_favelas > 0 else 0
    specials = n_veg + n_sparse + n_industrial + n_ambiguous
    usable = n_tiles - specials
    if usable < 1:
        raise DataError(f"grid of {n_tiles} tiles is too small for a scenario")

    if cfg.n_favelas > 0:
        n_favela_tiles = round(usable / (1.0 + cfg.target_imbalance))
        if n_favela_tiles < cfg.n_favelas:
            raise DataError(
                f"infeasible imbalance: {usable} usable tiles at ratio "
                f"{cfg.target_imbalance} leave {n_favela_tiles} favela tiles "
                f"for {cfg.n_favelas} favelas; enlarge the extent or lower the ratio"
            )
        sizes = _patch_sizes(n_favela_tiles, cfg.n_favelas)
        if max(sizes) > grid.n_cols:
            raise DataError(
                f"favela patch of {max(sizes)} tiles does not fit in {grid.n_cols} columns"
            )
    else:
        sizes = []

    roles: dict[tuple[int, int], str] = {}
    patches: list[tuple[int, int, int]] = []  # (row, first col, length)
    for length in sizes:
        for _ in range(1000):
            row = int(gen.integers(grid.n_rows))
            col = int(gen.integers(grid.n_cols - length + 1))
            run = [(row, c) for c in range(col, col + length)]
            if all(cell not in roles for cell in run):
                for cell in run:
                    roles[cell] = ROLE_FAVELA
                patches.append((row, col, length))
                break
        else:
            raise DataError("could not place favela patches; grid too crowded")

    free = [cell for cell in grid.tiles() if cell not in roles]
    picked = gen.choice(len(free), size=n_veg + n_sparse + n_industrial + n_ambiguous,
                        replace=False)
    cursor = 0
    for count, role in (
        (n_veg, ROLE_VEG),
        (n_sparse, ROLE_SPARSE),
        (n_industrial, ROLE_INDUSTRIAL),
        (n_ambiguous, ROLE_AMBIGUOUS),
    ):
        for i in picked[cursor : cursor + count]:
            roles[free[int(i)]] = role
        cursor += count
    return roles, patches


def _veg_pixel_bounds(role: str, pixels: int) -> tuple[int, int]:
    if role == ROLE_VEG:
        return math.floor(0.95 * pixels) + 1, pixels
    if role == ROLE_FAVELA:
        return 0, math.floor(0.10 * pixels)
    return 0, math.floor(0.20 * pixels)


def _overlap_proportion(tile: Rect, rects: list[Rect]) -> float:
    """Covered fraction of the tile by disjoint rectangles, computed with the
    same exact float arithmetic the clipping path produces for snapped
    inputs."""
    area = 0.0
    for r in rects:
        w = min(r.max_x, tile.max_x) - max(r.min_x, tile.min_x)
        h = min(r.max_y, tile.max_y) - max(r.min_y, tile.min_y)
        if w > 0 and h > 0:
            area += w * h
    return min(1.0, max(0.0, area / tile.area))


def generate(cfg: ScenarioConfig) -> Scenario:
    """Build the scenario in memory; same config, same bits."""
    grid = make_grid(cfg.extent, cfg.tile_size)
    if grid.n_rows < 4 or grid.n_cols < 4:
        raise DataError(f"scenario needs at least a 4x4 grid, got {grid.n_rows}x{grid.n_cols}")
    ppt = int(cfg.tile_size / cfg.pixel_size)
    height, width = grid.n_rows * ppt, grid.n_cols * ppt

    roles, patches = _assign_roles(cfg, grid, rng.generator(cfg.seed, _ROLES))

    favela_rects: list[Rect] = []
    for row, col, length in patches:
        first = tile_extent(grid, row, col)
        last = tile_extent(grid, row, col + length - 1)
        favela_rects.append(Rect(first.min_x, first.min_y, last.max_x, first.max_y))

    red = np.empty((height, width))
    nir = np.empty((height, width))
    buildings = np.empty((height, width))
    truth: list[TruthRecord] = []
    industrial_rects: list[Rect] = []
    gen = rng.generator(cfg.seed, _CONTENT)
    px = cfg.pixel_size
    sliver_max = math.floor(0.7 * ppt) - 1  # favela prop stays inside ]0, 0.7[

    for row, col in grid.tiles():
        role = roles.get((row, col), ROLE_FORMAL)
        tile = tile_extent(grid, row, col)

        lo, hi = _veg_pixel_bounds(role, ppt * ppt)
        n_veg_px = int(gen.integers(lo, hi + 1))
        veg_at = gen.choice(ppt * ppt, size=n_veg_px, replace=False)
        base_red = np.full(ppt * ppt, _URBAN_RED)
        base_nir = np.full(ppt * ppt, _URBAN_NIR)
        base_red[veg_at] = _VEG_RED
        base_nir[veg_at] = _VEG_NIR

        std = cfg.favela_texture_std if role == ROLE_FAVELA else cfg.formal_texture_std
        factor = np.maximum(1.0 + gen.normal(0.0, std, ppt * ppt), 0.05)

        sl = np.s_[row * ppt : (row + 1) * ppt, col * ppt : (col + 1) * ppt]
        red[sl] = (base_red * factor).reshape(ppt, ppt)
        nir[sl] = (base_nir * factor).reshape(ppt, ppt)
        built = _BUILT_SPARSE if role == ROLE_SPARSE else _BUILT_DENSE
        buildings[sl] = built

        if role == ROLE_AMBIGUOUS:
            k = int(gen.integers(1, sliver_max + 1))
            favela_rects.append(Rect(tile.min_x, tile.min_y, tile.min_x + k * px, tile.max_y))
        if role == ROLE_INDUSTRIAL:
            w = min(3, ppt - 2)
            industrial_rects.append(
                Rect(tile.min_x + px, tile.max_y - (1 + w) * px,
                     tile.min_x + (1 + w) * px, tile.max_y - px)
            )

        truth.append(
            TruthRecord(
                row, col,
                favela_prop=0.0,  # filled below once all favela rects exist
                veg_prop=n_veg_px / (ppt * ppt),
                building_prop=built,
                industrial=role == ROLE_INDUSTRIAL,
                expected_label=EXPECTED_LABEL[role],
            )
        )

    for rec in truth:
        rec.favela_prop = _overlap_proportion(tile_extent(grid, rec.row, rec.col), favela_rects)

    raster = Raster(grid.origin_x, grid.origin_y, px,
                    {"red": red, "nir": nir, "buildings": buildings})
    return Scenario(
        cfg, grid, raster,
        MultiPolygon.from_rects(favela_rects),
        MultiPolygon.from_rects(industrial_rects),
        truth,
    )


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def write_truth_csv(truth: list[TruthRecord], path) -> None:
    lines = [TRUTH_HEADER]
    for t in truth:
        lines.append(
            f"{t.row},{t.col},{t.favela_prop!r},{t.veg_prop!r},{t.building_prop!r},"
            f"{'true' if t.industrial else 'false'},{t.expected_label}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_truth_csv(path) -> list[TruthRecord]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != TRUTH_HEADER:
        raise DataError(f"{path}: expected header {TRUTH_HEADER!r}")
    out = []
    for line in lines[1:]:
        p = line.split(",")
        out.append(TruthRecord(int(p[0]), int(p[1]), float(p[2]), float(p[3]),
                               float(p[4]), p[5] == "true", p[6]))
    return out


def emit(scenario: Scenario, directory) -> dict[str, str]:
    """Write the fixture tree; returns the emitted paths by role."""
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "raster": directory / "city.pgrid",
        "favelas": directory / "favelas.geojson",
        "industrial": directory / "industrial.geojson",
        "truth": directory / "truth.csv",
        "scenario": directory / "scenario.json",
    }
    write_raster(scenario.raster, paths["raster"])
    write_multipolygon(scenario.favelas, paths["favelas"], {"layer": "favelas"})
    write_multipolygon(scenario.industrial, paths["industrial"], {"layer": "industrial"})
    write_truth_csv(scenario.truth, paths["truth"])
    cfg = scenario.config
    meta = {
        "extent": [cfg.extent.min_x, cfg.extent.min_y, cfg.extent.max_x, cfg.extent.max_y],
        "pixel_size": cfg.pixel_size,
        "tile_size": cfg.tile_size,
        "n_favelas": cfg.n_favelas,
        "favela_texture_std": cfg.favela_texture_std,
        "formal_texture_std": cfg.formal_texture_std,
        "target_imbalance": cfg.target_imbalance,
        "seed": cfg.seed,
        "grid": {"n_rows": scenario.grid.n_rows, "n_cols": scenario.grid.n_cols},
        "expected_counts": scenario.expected_counts(),
    }
    with open(paths["scenario"], "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {k: str(v) for k, v in paths.items()}
