"""favmap: tile-based informal settlement mapping workbench.

A reproducible pipeline around a 150 m analysis grid: zonal coverage
statistics from exact polygon clipping, tile filtering and labeling,
per-tile feature vectors, a from-scratch random forest, and repeated
balanced cross-validation reported as mean +/- std.
"""

from .dataset import (
    LabeledDataset,
    LabelRules,
    TileGrid,
    TileRecord,
    apply_filters,
    assign_label,
    build_dataset,
    make_grid,
    tile_extent,
)
from .errors import DataError, FavmapError, InputFormatError
from .eval import Confusion, CvConfig, CvReport, aggregate, kfold_split, metrics, run_cv, undersample
from .features import FeatureSet, assemble, baseline_features, load_embeddings, write_embeddings
from .forest import Forest, ForestConfig, best_split, fit, gini, predict, predict_proba
from .geom import (
    MultiPolygon,
    Polygon,
    PolygonRing,
    Raster,
    Rect,
    clip_polygon_to_rect,
    coverage_proportion,
    ndvi,
    pixel_fraction,
    ring_area,
)
from .synthcity import Scenario, ScenarioConfig, emit, generate

__version__ = "0.1.0"

__all__ = [
    "Confusion",
    "CvConfig",
    "CvReport",
    "DataError",
    "FavmapError",
    "FeatureSet",
    "Forest",
    "ForestConfig",
    "InputFormatError",
    "LabelRules",
    "LabeledDataset",
    "MultiPolygon",
    "Polygon",
    "PolygonRing",
    "Raster",
    "Rect",
    "Scenario",
    "ScenarioConfig",
    "TileGrid",
    "TileRecord",
    "aggregate",
    "apply_filters",
    "assemble",
    "assign_label",
    "baseline_features",
    "best_split",
    "build_dataset",
    "clip_polygon_to_rect",
    "coverage_proportion",
    "emit",
    "fit",
    "generate",
    "gini",
    "kfold_split",
    "load_embeddings",
    "make_grid",
    "metrics",
    "ndvi",
    "pixel_fraction",
    "predict",
    "predict_proba",
    "ring_area",
    "run_cv",
    "tile_extent",
    "undersample",
    "write_embeddings",
]
