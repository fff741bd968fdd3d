"""Portable on-disk formats shared by the CLI tools.

Raster files (``.pgrid``) are a single file with an ASCII header followed by
raw pixel data::

    pgrid 1
    width 600
    height 400
    origin_x 0.0
    origin_y 0.0
    pixel_size 5.0
    nodata none
    bands red nir buildings
    end

After the ``end`` line: ``width * height`` little-endian 32-bit floats per
band, row-major starting at the top row, bands stored in header order.

Vector layers are GeoJSON; Polygon and MultiPolygon geometries are accepted,
bare or wrapped in Feature / FeatureCollection.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InputFormatError
from .geom import MultiPolygon, Polygon, PolygonRing, Raster

_MAGIC = "pgrid 1"


def write_raster(raster: Raster, path) -> None:
    path = Path(path)
    for name in raster.bands:
        if " " in name or not name:
            raise InputFormatError(f"band name {name!r} must be non-empty and space-free")
    nodata = "none" if raster.nodata is None else repr(float(raster.nodata))
    header = "\n".join(
        [
            _MAGIC,
            f"width {raster.width}",
            f"height {raster.height}",
            f"origin_x {raster.origin_x!r}",
            f"origin_y {raster.origin_y!r}",
            f"pixel_size {raster.pixel_size!r}",
            f"nodata {nodata}",
            "bands " + " ".join(raster.bands),
            "end",
            "",
        ]
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for band in raster.bands.values():
            fh.write(np.ascontiguousarray(band, dtype="<f4").tobytes())


def read_raster(path) -> Raster:
    path = Path(path)
    with open(path, "rb") as fh:
        first = fh.readline().decode("ascii", "replace").strip()
        if first != _MAGIC:
            raise InputFormatError(f"{path}: not a pgrid file (got {first!r})")
        fields: dict[str, str] = {}
        while True:
            line = fh.readline()
            if not line:
                raise InputFormatError(f"{path}: truncated header (no 'end' line)")
            text = line.decode("ascii", "replace").strip()
            if text == "end":
                break
            key, _, value = text.partition(" ")
            if not value:
                raise InputFormatError(f"{path}: malformed header line {text!r}")
            fields[key] = value
        try:
            width = int(fields["width"])
            height = int(fields["height"])
            origin_x = float(fields["origin_x"])
            origin_y = float(fields["origin_y"])
            pixel_size = float(fields["pixel_size"])
            nodata = None if fields["nodata"] == "none" else float(fields["nodata"])
            names = fields["bands"].split()
        except KeyError as missing:
            raise InputFormatError(f"{path}: header missing {missing}") from None
        except ValueError as bad:
            raise InputFormatError(f"{path}: bad header value ({bad})") from None
        if len(set(names)) != len(names):
            raise InputFormatError(f"{path}: duplicate band names {names}")
        count = width * height
        bands = {}
        for name in names:
            raw = fh.read(count * 4)
            if len(raw) != count * 4:
                raise InputFormatError(f"{path}: band {name!r} truncated")
            bands[name] = np.frombuffer(raw, dtype="<f4").reshape(height, width).astype(np.float64)
        if fh.read(1):
            raise InputFormatError(f"{path}: trailing bytes after last band")
    return Raster(origin_x, origin_y, pixel_size, bands, nodata)


# ---------------------------------------------------------------------------
# GeoJSON
# ---------------------------------------------------------------------------


def _rings_to_polygon(coords, where: str) -> Polygon:
    if not coords:
        raise InputFormatError(f"{where}: polygon has no rings")
    rings = [PolygonRing.cleaned(ring) for ring in coords]
    return Polygon(rings[0], rings[1:])


def _collect_polygons(geometry, out: list[Polygon], where: str) -> None:
    gtype = geometry.get("type")
    if gtype == "Polygon":
        out.append(_rings_to_polygon(geometry.get("coordinates", []), where))
    elif gtype == "MultiPolygon":
        for i, poly in enumerate(geometry.get("coordinates", [])):
            out.append(_rings_to_polygon(poly, f"{where} polygon {i}"))
    elif gtype == "Feature":
        _collect_polygons(geometry.get("geometry") or {}, out, where)
    elif gtype == "FeatureCollection":
        for i, feat in enumerate(geometry.get("features", [])):
            _collect_polygons(feat, out, f"{where} feature {i}")
    elif gtype == "GeometryCollection":
        for i, geom in enumerate(geometry.get("geometries", [])):
            _collect_polygons(geom, out, f"{where} geometry {i}")
    else:
        raise InputFormatError(f"{where}: unsupported GeoJSON type {gtype!r}")


def read_multipolygon(path) -> MultiPolygon:
    """All polygonal geometry in a GeoJSON file, merged into one layer."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as bad:
        raise InputFormatError(f"{path}: invalid JSON ({bad})") from None
    polys: list[Polygon] = []
    _collect_polygons(doc, polys, str(path))
    return MultiPolygon(polys)


def _ring_coords(ring: PolygonRing) -> list[list[float]]:
    pts = [[float(x), float(y)] for x, y in ring.vertices]
    pts.append(pts[0])
    return pts


def multipolygon_geometry(mp: MultiPolygon) -> dict:
    return {
        "type": "MultiPolygon",
        "coordinates": [
            [_ring_coords(p.exterior)] + [_ring_coords(h) for h in p.holes]
            for p in mp.polygons
        ],
    }


def write_multipolygon(mp: MultiPolygon, path, properties: dict | None = None) -> None:
    doc = {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "geometry": multipolygon_geometry(mp),
                "properties": properties or {},
            }
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
