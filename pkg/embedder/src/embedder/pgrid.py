"""Reader for the favmap portable raster format.

Implemented from the documented format (ASCII header terminated by an
``end`` line, then row-major little-endian float32 per band) rather than by
importing favmap: the exporter consumes the workbench only through its file
interfaces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MAGIC = "pgrid 1"


class PgridError(ValueError):
    pass


@dataclass
class Grid:
    origin_x: float
    origin_y: float
    pixel_size: float
    bands: dict[str, np.ndarray]  # float32, (height, width)
    nodata: float | None

    @property
    def height(self) -> int:
        return next(iter(self.bands.values())).shape[0]

    @property
    def width(self) -> int:
        return next(iter(self.bands.values())).shape[1]


def read_pgrid(path) -> Grid:
    with open(path, "rb") as fh:
        if fh.readline().decode("ascii", "replace").strip() != _MAGIC:
            raise PgridError(f"{path}: not a pgrid file")
        fields: dict[str, str] = {}
        while True:
            line = fh.readline()
            if not line:
                raise PgridError(f"{path}: header never ends")
            text = line.decode("ascii", "replace").strip()
            if text == "end":
                break
            key, _, value = text.partition(" ")
            fields[key] = value
        try:
            width = int(fields["width"])
            height = int(fields["height"])
            names = fields["bands"].split()
            nodata = None if fields["nodata"] == "none" else float(fields["nodata"])
            origin_x = float(fields["origin_x"])
            origin_y = float(fields["origin_y"])
            pixel_size = float(fields["pixel_size"])
        except (KeyError, ValueError) as bad:
            raise PgridError(f"{path}: bad header ({bad})") from None
        bands = {}
        for name in names:
            raw = fh.read(width * height * 4)
            if len(raw) != width * height * 4:
                raise PgridError(f"{path}: band {name!r} truncated")
            bands[name] = np.frombuffer(raw, dtype="<f4").reshape(height, width)
    return Grid(origin_x, origin_y, pixel_size, bands, nodata)
