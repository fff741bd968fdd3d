"""favmap-embedder: per-tile embedding exporter.

Standalone companion to the favmap workbench.  It talks to favmap only
through documented file formats: pgrid rasters and dataset CSVs in, the
embedding interchange CSV out.
"""

from .chips import chip_tiles, read_chip, write_chip
from .export import export_embeddings
from .models import MODEL_IDS, ModelSpec, make_spec

__version__ = "0.1.0"

__all__ = [
    "MODEL_IDS",
    "ModelSpec",
    "chip_tiles",
    "export_embeddings",
    "make_spec",
    "read_chip",
    "write_chip",
]
