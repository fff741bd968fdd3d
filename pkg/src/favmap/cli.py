"""Command-line entry point.

Subcommands::

    favmap synth     generate a synthetic fixture city
    favmap label     build the labeled tile dataset from raster/vector inputs
    favmap features  extract baseline features for a labeled dataset
    favmap cv        run balanced repeated cross-validation
    favmap report    render one or more report JSONs as a text table

Every subcommand accepts ``--config FILE`` with ``key = value`` lines;
explicit flags win over the file, the file wins over built-in defaults.
Exit codes: 0 success, 1 runtime/data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import dataset as ds
from . import eval as ev
from . import features as ft
from . import synthcity as sc
from .errors import DataError, FavmapError, InputFormatError
from .forest import ForestConfig
from .formats import read_multipolygon, read_raster
from .geom import Raster, Rect, ndvi


def _read_config_file(path, defaults: dict) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, value = line.partition("=")
            key, value = key.strip().replace("-", "_"), value.strip()
            if not eq or not value:
                raise InputFormatError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            if key not in defaults:
                raise InputFormatError(f"{path}:{lineno}: unknown option {key!r}")
            ref = defaults[key]
            try:
                if isinstance(ref, bool):
                    if value.lower() not in ("true", "false"):
                        raise ValueError("expected true/false")
                    out[key] = value.lower() == "true"
                elif isinstance(ref, int):
                    out[key] = int(value)
                elif isinstance(ref, float):
                    out[key] = float(value)
                else:
                    out[key] = value
            except ValueError as bad:
                raise InputFormatError(f"{path}:{lineno}: bad value for {key}: {bad}") from None
    return out


def _effective(args: argparse.Namespace, defaults: dict) -> dict:
    cfg = dict(defaults)
    if getattr(args, "config", None):
        cfg.update(_read_config_file(args.config, defaults))
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _add_config_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value file supplying defaults (flags win)")


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

_SYNTH_DEFAULTS = {
    "rows": 20,
    "cols": 20,
    "tile_size": 150.0,
    "pixel_size": 5.0,
    "n_favelas": 4,
    "favela_std": 0.30,
    "formal_std": 0.10,
    "imbalance": 30.0,
    "seed": 0,
}


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _effective(args, _SYNTH_DEFAULTS)
    extent = Rect(0.0, -cfg["rows"] * cfg["tile_size"], cfg["cols"] * cfg["tile_size"], 0.0)
    scenario = sc.generate(
        sc.ScenarioConfig(
            extent=extent,
            pixel_size=cfg["pixel_size"],
            tile_size=cfg["tile_size"],
            n_favelas=cfg["n_favelas"],
            favela_texture_std=cfg["favela_std"],
            formal_texture_std=cfg["formal_std"],
            target_imbalance=cfg["imbalance"],
            seed=cfg["seed"],
        )
    )
    paths = sc.emit(scenario, args.out)
    counts = scenario.expected_counts()
    print(f"wrote fixture to {args.out}: {scenario.grid.n_rows}x{scenario.grid.n_cols} tiles")
    for name, path in sorted(paths.items()):
        print(f"  {name}: {path}")
    favela = counts.get("favela", 0)
    nonfavela = counts.get("nonfavela", 0)
    ratio = f"{nonfavela / favela:.1f}:1" if favela else "n/a"
    print(f"  expected labels: {favela} favela, {nonfavela} nonfavela (imbalance {ratio})")
    return 0


# ---------------------------------------------------------------------------
# label
# ---------------------------------------------------------------------------

_LABEL_DEFAULTS = {
    "tile_size": 150.0,
    "building_min": 0.50,
    "veg_max": 0.95,
    "favela_min": 0.70,
    "ndvi_threshold": 0.60,
    "red_band": "red",
    "nir_band": "nir",
    "buildings_band": "buildings",
    "geojson": False,
    "threads": 0,  # 0: use available cores
}


def cmd_label(args: argparse.Namespace) -> int:
    cfg = _effective(args, _LABEL_DEFAULTS)
    raster = read_raster(args.raster)
    favelas = read_multipolygon(args.favelas)
    industrial = read_multipolygon(args.industrial)
    rules = ds.LabelRules(
        building_min=cfg["building_min"],
        veg_max=cfg["veg_max"],
        favela_min=cfg["favela_min"],
        ndvi_threshold=cfg["ndvi_threshold"],
    )
    ndvi_raster = Raster(
        raster.origin_x, raster.origin_y, raster.pixel_size,
        {"ndvi": ndvi(raster.band(cfg["red_band"]), raster.band(cfg["nir_band"]),
                      nodata=raster.nodata)},
        nodata=raster.nodata,
    )
    grid = ds.make_grid(raster.extent(), cfg["tile_size"])
    threads = cfg["threads"] or os.cpu_count() or 1
    labeled = ds.build_dataset(
        grid, favelas, ndvi_raster, raster, industrial, rules,
        buildings_band=cfg["buildings_band"], threads=threads,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds.write_dataset_csv(labeled, out / "dataset.csv")
    ds.write_provenance(labeled, out / "provenance.json")
    if cfg["geojson"]:
        ds.write_tiles_geojson(labeled, out / "tiles.geojson")
    counts = labeled.provenance["class_counts"]
    print(f"labeled {len(labeled.records)} tiles "
          f"({counts['favela']} favela, {counts['nonfavela']} nonfavela); "
          f"removed {labeled.provenance['removed_tiles']}, "
          f"discarded {labeled.provenance['discarded_ambiguous']}")
    print(f"  dataset: {out / 'dataset.csv'}")
    print(f"  provenance: {out / 'provenance.json'}")
    return 0


# ---------------------------------------------------------------------------
# features
# ---------------------------------------------------------------------------


def cmd_features(args: argparse.Namespace) -> int:
    raster = read_raster(args.raster)
    labeled = ds.read_dataset_csv(args.dataset, grid=_grid_for(raster, args))
    fs = ft.baseline_featureset(raster, labeled)
    ft.write_embeddings(fs, args.out)
    print(f"wrote {len(fs)} baseline vectors of dimension {fs.dimension} to {args.out}")
    return 0


def _grid_for(raster: Raster, args: argparse.Namespace) -> ds.TileGrid:
    tile_size = getattr(args, "tile_size", None) or 150.0
    return ds.make_grid(raster.extent(), tile_size)


# ---------------------------------------------------------------------------
# cv
# ---------------------------------------------------------------------------

_CV_DEFAULTS = {
    "k": 5,
    "repeats": 5,
    "seed": 0,
    "trees": 100,
    "max_features": 0,  # 0: ceil(sqrt(d))
    "min_samples_leaf": 1,
    "max_depth": 0,  # 0: unlimited
    "threads": 0,  # 0: use available cores
    "tile_size": 150.0,
}


def cmd_cv(args: argparse.Namespace) -> int:
    cfg = _effective(args, _CV_DEFAULTS)
    if args.features == "baseline":
        if not args.raster:
            raise DataError("--features baseline requires --raster")
        raster = read_raster(args.raster)
        labeled = ds.read_dataset_csv(args.dataset, grid=_grid_for(raster, args))
        featureset = ft.baseline_featureset(raster, labeled)
    else:
        labeled = ds.read_dataset_csv(args.dataset)
        featureset = ft.load_embeddings(args.features)

    forest_cfg = ForestConfig(
        n_trees=cfg["trees"],
        max_features=cfg["max_features"] or None,
        min_samples_leaf=cfg["min_samples_leaf"],
        max_depth=cfg["max_depth"] or None,
        seed=cfg["seed"],
    )
    cv_cfg = ev.CvConfig(k=cfg["k"], repeats=cfg["repeats"], seed=cfg["seed"], forest=forest_cfg)
    threads = cfg["threads"] or os.cpu_count() or 1
    report = ev.run_cv(labeled, featureset, cv_cfg, threads=threads)

    report.config["inputs"] = {
        "dataset": str(args.dataset),
        "features": str(args.features),
        "raster": str(args.raster) if args.raster else None,
    }
    provenance = Path(args.dataset).parent / "provenance.json"
    if provenance.is_file():
        with open(provenance, encoding="utf-8") as fh:
            report.config["labeling"] = json.load(fh)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ev.write_report(report, out / "cv_report.json")
    table = ev.render_table([(featureset.source, report.summary)])
    (out / "cv_table.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    print(f"  report: {out / 'cv_report.json'}")
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def cmd_report(args: argparse.Namespace) -> int:
    entries = []
    for path in args.reports:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        try:
            method = doc["config"].get("feature_source", Path(path).stem)
            entries.append((method, doc["summary"]))
        except KeyError as missing:
            raise InputFormatError(f"{path}: report is missing {missing}") from None
    table = ev.render_table(entries)
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    print(table, end="")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="favmap",
        description="Tile-based informal settlement mapping workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic fixture city")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--tile-size", dest="tile_size", type=float)
    p.add_argument("--pixel-size", dest="pixel_size", type=float)
    p.add_argument("--n-favelas", dest="n_favelas", type=int)
    p.add_argument("--favela-std", dest="favela_std", type=float)
    p.add_argument("--formal-std", dest="formal_std", type=float)
    p.add_argument("--imbalance", type=float)
    p.add_argument("--seed", type=int)
    _add_config_flag(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("label", help="build the labeled tile dataset")
    p.add_argument("--raster", required=True, help="pgrid raster with red/nir/buildings bands")
    p.add_argument("--favelas", required=True, help="favela outlines GeoJSON")
    p.add_argument("--industrial", required=True, help="industrial zones GeoJSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--tile-size", dest="tile_size", type=float)
    p.add_argument("--building-min", dest="building_min", type=float)
    p.add_argument("--veg-max", dest="veg_max", type=float)
    p.add_argument("--favela-min", dest="favela_min", type=float)
    p.add_argument("--ndvi-threshold", dest="ndvi_threshold", type=float)
    p.add_argument("--red-band", dest="red_band")
    p.add_argument("--nir-band", dest="nir_band")
    p.add_argument("--buildings-band", dest="buildings_band")
    p.add_argument("--geojson", action="store_true", default=None,
                   help="also write labeled tile squares as GeoJSON")
    p.add_argument("--threads", type=int)
    _add_config_flag(p)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("features", help="extract baseline features")
    p.add_argument("--raster", required=True)
    p.add_argument("--dataset", required=True, help="dataset CSV from 'label'")
    p.add_argument("--out", required=True, help="output features CSV")
    p.add_argument("--tile-size", dest="tile_size", type=float)
    _add_config_flag(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("cv", help="run balanced repeated cross-validation")
    p.add_argument("--dataset", required=True, help="dataset CSV from 'label'")
    p.add_argument("--features", required=True,
                   help="embeddings CSV, or 'baseline' to extract from --raster")
    p.add_argument("--raster", help="raster for --features baseline")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--k", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--trees", type=int)
    p.add_argument("--max-features", dest="max_features", type=int)
    p.add_argument("--min-samples-leaf", dest="min_samples_leaf", type=int)
    p.add_argument("--max-depth", dest="max_depth", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--tile-size", dest="tile_size", type=float)
    _add_config_flag(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("report", help="render report JSONs as a text table")
    p.add_argument("reports", nargs="+", help="cv_report.json files")
    p.add_argument("--out", help="also write the table to this path")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FavmapError, OSError) as bad:
        print(f"error: {bad}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
