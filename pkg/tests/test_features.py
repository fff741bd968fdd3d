"""Interchange CSV parsing, the baseline extractor, and the design-matrix join."""

import numpy as np
import pytest

from favmap.dataset import LabeledDataset, LabelRules, TileGrid, TileRecord
from favmap.errors import DataError, InputFormatError
from favmap.features import (
    FeatureSet,
    assemble,
    baseline_features,
    baseline_featureset,
    load_embeddings,
    write_embeddings,
)
from favmap.geom import Raster, Rect


def write(tmp_path, text, name="emb.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


GOOD = """\
# source=demo-model dim=4
row,col,f0,f1,f2,f3
0,0,1.0,2.0,3.0,4.0
0,1,0.5,0.5,0.5,0.5
2,3,-1.0,0.0,1.0,2.0
"""


def test_load_embeddings_happy_path(tmp_path):
    fs = load_embeddings(write(tmp_path, GOOD))
    assert fs.dimension == 4
    assert fs.source == "demo-model"
    assert len(fs) == 3
    np.testing.assert_array_equal(fs.vectors[(2, 3)], [-1.0, 0.0, 1.0, 2.0])


def test_load_embeddings_extra_header_tokens_ok(tmp_path):
    text = GOOD.replace("dim=4", "dim=4 pooling=cls resize=518")
    fs = load_embeddings(write(tmp_path, text))
    assert fs.dimension == 4


def test_load_embeddings_arity_error_names_row(tmp_path):
    text = GOOD.replace("0,1,0.5,0.5,0.5,0.5", "0,1,0.5,0.5,0.5")
    with pytest.raises(InputFormatError, match=":4:"):
        load_embeddings(write(tmp_path, text))


def test_load_embeddings_duplicate_tile(tmp_path):
    text = GOOD.replace("2,3,-1.0,0.0,1.0,2.0", "0,0,1.0,1.0,1.0,1.0")
    with pytest.raises(InputFormatError, match="duplicate"):
        load_embeddings(write(tmp_path, text))


def test_load_embeddings_nonfinite(tmp_path):
    text = GOOD.replace("3.0", "nan")
    with pytest.raises(InputFormatError, match="non-finite"):
        load_embeddings(write(tmp_path, text))


def test_load_embeddings_requires_comment_line(tmp_path):
    with pytest.raises(InputFormatError, match="comment"):
        load_embeddings(write(tmp_path, GOOD.split("\n", 1)[1]))


def test_load_embeddings_header_must_match_dim(tmp_path):
    text = GOOD.replace("dim=4", "dim=3")
    with pytest.raises(InputFormatError, match="header"):
        load_embeddings(write(tmp_path, text))


def test_embeddings_round_trip_identity(tmp_path):
    rng = np.random.default_rng(1)
    fs = FeatureSet(dimension=7, source="roundtrip")
    for i in range(5):
        fs.add((i, 2 * i), rng.normal(0, 3, 7))
    path = tmp_path / "rt.csv"
    write_embeddings(fs, path)
    back = load_embeddings(path)
    assert back.dimension == fs.dimension and back.source == fs.source
    assert set(back.vectors) == set(fs.vectors)
    for tid in fs.vectors:
        np.testing.assert_array_equal(back.vectors[tid], fs.vectors[tid])


# ---------------------------------------------------------------------------
# baseline extractor
# ---------------------------------------------------------------------------


def test_baseline_constant_band():
    raster = Raster(0.0, 0.0, 1.0, {"c": np.full((4, 4), 2.5)})
    vec = baseline_features(raster, Rect(0.0, -4.0, 4.0, 0.0))
    mean, std, lo, hi = vec[:4]
    assert (mean, std, lo, hi) == (2.5, 0.0, 2.5, 2.5)
    assert vec[4] == 1.0 and np.all(vec[5:12] == 0.0)  # all mass in the first bin


def test_baseline_two_bands_dimension():
    raster = Raster(0.0, 0.0, 1.0, {"a": np.zeros((4, 4)), "b": np.ones((4, 4))})
    vec = baseline_features(raster, Rect(0.0, -4.0, 4.0, 0.0))
    assert vec.shape == (24,)


def test_baseline_histogram_uses_global_range():
    band = np.zeros((2, 4))
    band[:, 2:] = 8.0  # global range [0, 8]
    raster = Raster(0.0, 0.0, 1.0, {"v": band})
    left = baseline_features(raster, Rect(0.0, -2.0, 2.0, 0.0))
    right = baseline_features(raster, Rect(2.0, -2.0, 4.0, 0.0))
    assert left[4] == 1.0  # zeros in the lowest global bin
    assert right[11] == 1.0  # eights in the highest global bin


def test_baseline_identical_tiles_equal_vectors():
    tile = np.arange(16.0).reshape(4, 4)
    band = np.hstack([tile, tile])
    raster = Raster(0.0, 0.0, 1.0, {"v": band})
    a = baseline_features(raster, Rect(0.0, -4.0, 4.0, 0.0))
    b = baseline_features(raster, Rect(4.0, -4.0, 8.0, 0.0))
    np.testing.assert_array_equal(a, b)


def test_baseline_empty_tile_errors():
    raster = Raster(0.0, 0.0, 1.0, {"v": np.zeros((2, 2))})
    with pytest.raises(DataError, match="no pixels"):
        baseline_features(raster, Rect(50.0, 50.0, 60.0, 60.0))


def test_baseline_separates_texture_classes(small_scenario):
    """The generator gives favela tiles a distinct texture std by design."""
    from favmap.dataset import build_dataset
    from favmap.geom import ndvi

    s = small_scenario
    ndvi_raster = Raster(
        s.raster.origin_x, s.raster.origin_y, s.raster.pixel_size,
        {"ndvi": ndvi(s.raster.band("red"), s.raster.band("nir"))},
    )
    labeled = build_dataset(s.grid, s.favelas, ndvi_raster, s.raster, s.industrial)
    fs = baseline_featureset(s.raster, labeled)
    stds = {"favela": [], "nonfavela": []}
    for rec in labeled.records:
        stds[rec.label].append(fs.vectors[rec.tile_id][1])  # red-band std feature
    assert min(stds["favela"]) > max(stds["nonfavela"])


# ---------------------------------------------------------------------------
# assemble
# ---------------------------------------------------------------------------


def _dataset(ids_labels):
    grid = TileGrid(0.0, 0.0, 150.0, 10, 10)
    records = [
        TileRecord(r, c, 1.0 if lab == "favela" else 0.0, 0.1, 0.8, False, lab)
        for (r, c), lab in ids_labels
    ]
    return LabeledDataset(grid, LabelRules(), records, {})


def test_assemble_shapes_and_order():
    ds = _dataset([((1, 0), "favela"), ((0, 1), "nonfavela"), ((0, 0), "nonfavela")])
    fs = FeatureSet(dimension=3, source="demo")
    for rec in ds.records:
        fs.add(rec.tile_id, [rec.row, rec.col, 1.0])
    X, y, ids = assemble(ds, fs)
    assert X.shape == (3, 3)
    assert ids == [(0, 0), (0, 1), (1, 0)]  # sorted by (row, col)
    np.testing.assert_array_equal(y, [0, 0, 1])
    np.testing.assert_array_equal(X[2], [1.0, 0.0, 1.0])


def test_assemble_missing_tile_named():
    ds = _dataset([((0, 0), "favela"), ((0, 1), "nonfavela")])
    fs = FeatureSet(dimension=1, source="demo")
    fs.add((0, 0), [1.0])
    with pytest.raises(DataError, match=r"\(0, 1\)"):
        assemble(ds, fs)


def test_assemble_ignores_extras():
    ds = _dataset([((0, 0), "favela"), ((0, 1), "nonfavela")])
    fs = FeatureSet(dimension=1, source="demo")
    for tid in [(0, 0), (0, 1), (5, 5), (6, 6)]:
        fs.add(tid, [1.0])
    X, y, ids = assemble(ds, fs)
    assert len(ids) == 2


def test_assemble_round_trip_vectors():
    ds = _dataset([((0, 0), "favela"), ((3, 7), "nonfavela")])
    rng = np.random.default_rng(2)
    fs = FeatureSet(dimension=5, source="demo")
    for rec in ds.records:
        fs.add(rec.tile_id, rng.normal(size=5))
    X, _, ids = assemble(ds, fs)
    for i, tid in enumerate(ids):
        np.testing.assert_array_equal(X[i], fs.vectors[tid])


def test_featureset_validation():
    fs = FeatureSet(dimension=2, source="demo")
    with pytest.raises(DataError):
        fs.add((0, 0), [1.0])
    with pytest.raises(DataError):
        fs.add((0, 0), [np.inf, 0.0])
