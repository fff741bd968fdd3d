import numpy as np
import pytest

from embedder.chips import META_NAME, write_chip


@pytest.fixture
def chip_dir(tmp_path):
    """8 fixture chips with 12 synthetic bands, 15x15 px each."""
    import json

    rng = np.random.default_rng(0)
    bands = [f"B{i:02d}" for i in range(12)]
    out = tmp_path / "chips"
    out.mkdir()
    for i in range(8):
        row, col = divmod(i, 4)
        write_chip(out / f"r{row}_c{col}.tif",
                   [rng.normal(0, 1, (15, 15)).astype(np.float32) for _ in bands])
    meta = {"bands": bands, "pixel_size": 10.0, "tile_size": 150.0,
            "chip_pixels": 15, "origin_x": 0.0, "origin_y": 0.0}
    (out / META_NAME).write_text(json.dumps(meta))
    return out
