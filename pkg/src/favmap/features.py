"""Per-tile feature vectors and the design-matrix join.

Vectors come either from an interchange CSV written by an external embedding
exporter, or from the built-in baseline extractor (simple band statistics)
so the whole pipeline runs without any neural network.

Interchange CSV format (UTF-8)::

    # source=<model-id> dim=<d> [extra=...]
    row,col,f0,f1,...,f{d-1}
    3,17,0.12,...

The comment line carries ``key=value`` tokens; ``source`` and ``dim`` are
required, anything else is informational and preserved verbatim.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import LABEL_FAVELA, LabeledDataset
from .errors import DataError, InputFormatError
from .geom import Raster, Rect, pixel_values

logger = logging.getLogger(__name__)

BASELINE_SOURCE = "baseline"
_STATS_PER_BAND = 12  # mean, std, min, max + 8 histogram bins


@dataclass
class FeatureSet:
    """Fixed-dimension vectors keyed by tile id."""

    dimension: int
    source: str
    vectors: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise DataError(f"dimension must be positive, got {self.dimension}")
        for tid, vec in self.vectors.items():
            self._check(tid, vec)

    def _check(self, tile_id: tuple[int, int], vec: np.ndarray) -> None:
        if vec.shape != (self.dimension,):
            raise DataError(
                f"tile {tile_id}: expected {self.dimension} values, got {vec.shape}"
            )
        if not np.all(np.isfinite(vec)):
            raise DataError(f"tile {tile_id}: non-finite feature value")

    def add(self, tile_id: tuple[int, int], values) -> None:
        if tile_id in self.vectors:
            raise DataError(f"duplicate tile_id {tile_id}")
        vec = np.asarray(values, dtype=np.float64)
        self._check(tile_id, vec)
        self.vectors[tile_id] = vec

    def __len__(self) -> int:
        return len(self.vectors)


def load_embeddings(path) -> FeatureSet:
    """Parse and validate an interchange CSV.

    Errors name the offending row: wrong arity, duplicate tile id, and
    non-finite values are all rejected.
    """
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    lines = [ln for ln in lines if ln.strip()]
    if len(lines) < 2 or not lines[0].startswith("#"):
        raise InputFormatError(f"{path}: missing '# source=... dim=...' comment line")
    meta = {}
    for token in lines[0].lstrip("#").split():
        key, eq, value = token.partition("=")
        if eq:
            meta[key] = value
    if "source" not in meta or "dim" not in meta:
        raise InputFormatError(f"{path}: comment line must carry source= and dim=")
    try:
        dim = int(meta["dim"])
    except ValueError:
        raise InputFormatError(f"{path}: dim={meta['dim']!r} is not an integer") from None

    expected_header = "row,col," + ",".join(f"f{i}" for i in range(dim))
    if lines[1] != expected_header:
        raise InputFormatError(f"{path}: header does not match dim={dim}")

    fs = FeatureSet(dimension=dim, source=meta["source"])
    for lineno, line in enumerate(lines[2:], start=3):
        parts = line.split(",")
        if len(parts) != dim + 2:
            raise InputFormatError(
                f"{path}:{lineno}: expected {dim + 2} fields, got {len(parts)}"
            )
        try:
            tid = (int(parts[0]), int(parts[1]))
            values = [float(v) for v in parts[2:]]
        except ValueError as bad:
            raise InputFormatError(f"{path}:{lineno}: {bad}") from None
        if any(not math.isfinite(v) for v in values):
            raise InputFormatError(f"{path}:{lineno}: non-finite value for tile {tid}")
        try:
            fs.add(tid, values)
        except DataError as bad:
            raise InputFormatError(f"{path}:{lineno}: {bad}") from None
    return fs


def write_embeddings(fs: FeatureSet, path) -> None:
    """Write an interchange CSV; floats use shortest round-trip formatting so
    load(write(fs)) reproduces fs exactly."""
    lines = [f"# source={fs.source} dim={fs.dimension}"]
    lines.append("row,col," + ",".join(f"f{i}" for i in range(fs.dimension)))
    for (row, col) in sorted(fs.vectors):
        vec = fs.vectors[(row, col)]
        lines.append(f"{row},{col}," + ",".join(repr(float(v)) for v in vec))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Baseline extractor
# ---------------------------------------------------------------------------


def _band_range(raster: Raster, name: str) -> tuple[float, float]:
    data = raster.band(name).ravel()
    if raster.nodata is not None:
        if isinstance(raster.nodata, float) and math.isnan(raster.nodata):
            data = data[~np.isnan(data)]
        else:
            data = data[data != raster.nodata]
    if data.size == 0:
        raise DataError(f"band {name!r} has no valid pixels")
    lo, hi = float(data.min()), float(data.max())
    if hi <= lo:
        hi = lo + 1.0  # constant band: everything lands in bin 0
    return lo, hi


def baseline_features(
    raster: Raster,
    tile: Rect,
    band_ranges: dict[str, tuple[float, float]] | None = None,
) -> np.ndarray:
    """Band statistics for one tile: per band mean, std, min, max and an
    8-bin histogram over the band's global value range (12 values per band).

    Histogram bins use the global range, not the tile's, so the features are
    comparable across tiles.  ``band_ranges`` lets callers precompute the
    ranges when extracting many tiles.
    """
    ranges = band_ranges or {name: _band_range(raster, name) for name in raster.bands}
    out = []
    for name in raster.band_names:
        vals = pixel_values(raster, name, tile)
        if vals.size == 0:
            raise DataError(f"no pixels in tile {tile} for band {name!r}")
        counts, _ = np.histogram(vals, bins=8, range=ranges[name])
        out.extend([float(vals.mean()), float(vals.std()), float(vals.min()), float(vals.max())])
        out.extend((counts / vals.size).tolist())
    return np.asarray(out, dtype=np.float64)


def baseline_featureset(raster: Raster, dataset: LabeledDataset) -> FeatureSet:
    """Baseline vectors for every labeled tile of a dataset."""
    from .dataset import tile_extent

    ranges = {name: _band_range(raster, name) for name in raster.bands}
    fs = FeatureSet(dimension=_STATS_PER_BAND * len(raster.bands), source=BASELINE_SOURCE)
    for rec in dataset.records:
        rect = tile_extent(dataset.grid, rec.row, rec.col)
        fs.add(rec.tile_id, baseline_features(raster, rect, ranges))
    return fs


def assemble(
    dataset: LabeledDataset, features: FeatureSet
) -> tuple[np.ndarray, np.ndarray, list[tuple[int, int]]]:
    """Join dataset labels with feature vectors into (X, y, ids).

    Rows are ordered by (row, col); y encodes favela = 1 (the positive
    class).  Every dataset tile must have a vector; extra vectors are
    ignored with a count reported.
    """
    ids = sorted(r.tile_id for r in dataset.records)
    missing = [tid for tid in ids if tid not in features.vectors]
    if missing:
        shown = ", ".join(str(t) for t in missing[:20])
        more = "" if len(missing) <= 20 else f" (+{len(missing) - 20} more)"
        raise DataError(f"{len(missing)} tiles missing from features: {shown}{more}")
    extra = len(features.vectors) - len(ids)
    if extra > 0:
        logger.info("ignoring %d feature vectors without a dataset tile", extra)
    labels = dataset.labels()
    X = np.stack([features.vectors[tid] for tid in ids])
    y = np.asarray([1 if labels[tid] == LABEL_FAVELA else 0 for tid in ids], dtype=np.int8)
    return X, y, ids
