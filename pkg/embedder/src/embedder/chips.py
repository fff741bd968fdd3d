"""Cut per-tile image chips out of a raster.

One chip per labeled tile, named ``r{row}_c{col}.tif``: a multipage float32
TIFF, one page per band in raster band order (lossless).  Band names and
grid geometry go to ``chips_meta.json`` beside the chips.

Chips are pixel-aligned to tile extents under the half-open convention, so
adjacent chips share no pixels.
"""

from __future__ import annotations

import json
import logging
import re
from pathlib import Path

import numpy as np
from PIL import Image, ImageSequence

from .pgrid import read_pgrid

logger = logging.getLogger(__name__)

META_NAME = "chips_meta.json"
_CHIP_RE = re.compile(r"^r(\d+)_c(\d+)\.tiff?$")


class ChipError(ValueError):
    pass


def write_chip(path, bands: list[np.ndarray]) -> None:
    frames = [Image.fromarray(np.ascontiguousarray(b, dtype=np.float32), mode="F") for b in bands]
    frames[0].save(path, save_all=True, append_images=frames[1:])


def read_chip(path) -> list[np.ndarray]:
    with Image.open(path) as im:
        return [np.array(frame, dtype=np.float32) for frame in ImageSequence.Iterator(im)]


def _labeled_tiles(dataset_csv) -> list[tuple[int, int]]:
    with open(dataset_csv, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("row,col,"):
        raise ChipError(f"{dataset_csv}: expected a dataset CSV with a row,col,... header")
    tiles = []
    for line in lines[1:]:
        parts = line.split(",")
        tiles.append((int(parts[0]), int(parts[1])))
    return sorted(tiles)


def chip_tiles(raster_path, dataset_csv, out_dir, tile_size: float = 150.0) -> list[Path]:
    """Write one chip per labeled tile; returns the chip paths in (row, col)
    order.  A tile not fully covered by the raster is an error."""
    grid = read_pgrid(raster_path)
    ppt = tile_size / grid.pixel_size
    if ppt != int(ppt) or ppt < 1:
        raise ChipError(
            f"tile size {tile_size} is not a whole number of {grid.pixel_size} m pixels"
        )
    ppt = int(ppt)
    tiles = _labeled_tiles(dataset_csv)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    uncovered = [
        (r, c) for r, c in tiles
        if (r + 1) * ppt > grid.height or (c + 1) * ppt > grid.width
    ]
    if uncovered:
        raise ChipError(f"raster does not cover tiles: {uncovered[:10]}")

    paths = []
    for row, col in tiles:
        window = np.s_[row * ppt : (row + 1) * ppt, col * ppt : (col + 1) * ppt]
        path = out_dir / f"r{row}_c{col}.tif"
        write_chip(path, [grid.bands[name][window] for name in grid.bands])
        paths.append(path)

    meta = {
        "bands": list(grid.bands),
        "pixel_size": grid.pixel_size,
        "tile_size": tile_size,
        "chip_pixels": ppt,
        "origin_x": grid.origin_x,
        "origin_y": grid.origin_y,
    }
    with open(out_dir / META_NAME, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    logger.info("wrote %d chips of %dx%d pixels to %s", len(paths), ppt, ppt, out_dir)
    return paths


def discover_chips(chips_dir) -> tuple[dict, list[tuple[int, int, Path]]]:
    """(meta, [(row, col, path), ...]) ordered by (row, col)."""
    chips_dir = Path(chips_dir)
    meta_path = chips_dir / META_NAME
    if not meta_path.is_file():
        raise ChipError(f"{chips_dir}: missing {META_NAME}")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    found: dict[tuple[int, int], Path] = {}
    for path in sorted(chips_dir.iterdir()):
        m = _CHIP_RE.match(path.name)
        if not m:
            continue
        tid = (int(m.group(1)), int(m.group(2)))
        if tid in found:
            raise ChipError(f"duplicate chip for tile {tid}: {found[tid].name} and {path.name}")
        found[tid] = path
    if not found:
        raise ChipError(f"{chips_dir}: no r{{row}}_c{{col}}.tif chips found")
    return meta, [(r, c, found[(r, c)]) for r, c in sorted(found)]
