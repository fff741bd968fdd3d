"""Command line for the embedding exporter.

    favmap-embed chip   --raster city.pgrid --dataset dataset.csv --out chips/
    favmap-embed export --chips chips/ --model croma --out embeddings.csv

Exit codes: 0 success, 1 runtime error or any skipped chip, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .chips import ChipError, chip_tiles
from .export import export_embeddings
from .models import MODEL_IDS, ModelError, make_spec
from .pgrid import PgridError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="favmap-embed",
                                     description="Per-tile embedding exporter")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("chip", help="cut per-tile chips from a pgrid raster")
    p.add_argument("--raster", required=True)
    p.add_argument("--dataset", required=True, help="labeled dataset CSV (row,col,... header)")
    p.add_argument("--out", required=True, help="chip directory")
    p.add_argument("--tile-size", dest="tile_size", type=float, default=150.0)
    p.set_defaults(func=cmd_chip)

    p = sub.add_parser("export", help="embed chips into an interchange CSV")
    p.add_argument("--chips", required=True, help="chip directory from 'chip'")
    p.add_argument("--model", required=True, choices=MODEL_IDS)
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--bands", help="comma-separated chip band names fed to the model")
    p.add_argument("--resize", type=int, help="override the model's input size")
    p.add_argument("--weights", default="pretrained",
                   help="'pretrained', a checkpoint path, or random:<seed>")
    p.set_defaults(func=cmd_export)

    return parser


def cmd_chip(args: argparse.Namespace) -> int:
    paths = chip_tiles(args.raster, args.dataset, args.out, tile_size=args.tile_size)
    print(f"wrote {len(paths)} chips to {args.out}")
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    bands = args.bands.split(",") if args.bands else None
    spec = make_spec(args.model, bands=bands, resize=args.resize, weights=args.weights)
    skipped = export_embeddings(args.chips, spec, args.out)
    if skipped:
        print(f"error: {skipped} chips skipped", file=sys.stderr)
        return 1
    print(f"wrote embeddings to {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ChipError, ModelError, PgridError, OSError) as bad:
        print(f"error: {bad}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
