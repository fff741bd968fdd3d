"""Run an encoder over a chip directory and write the interchange CSV.

Output format matches what the favmap workbench loads::

    # source=<model-id> dim=<d> pooling=... resize=... weights=... norm=...
    row,col,f0,...,f{d-1}
    0,3,0.0123,...

Values are formatted to 6 significant digits; with fixed weights and chips
two exports are byte-identical (inference runs single-threaded in eval
mode, no augmentation).
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .chips import META_NAME, ChipError, discover_chips, read_chip
from .models import ModelSpec, ModelError, load_encoder

logger = logging.getLogger(__name__)

_BATCH = 16


def _prepare(bands: list[np.ndarray], names: list[str], spec: ModelSpec, norm: str) -> torch.Tensor:
    by_name = dict(zip(names, bands))
    missing = [b for b in spec.bands if b not in by_name]
    if missing:
        raise ChipError(f"chip lacks bands {missing}; has {names}")
    stack = np.stack([by_name[b].astype(np.float32) for b in spec.bands])
    x = torch.from_numpy(stack)[None]  # 1, C, H, W
    if x.shape[-2:] != (spec.resize, spec.resize):
        x = F.interpolate(x, size=(spec.resize, spec.resize),
                          mode="bilinear", align_corners=False)
    if norm == "per-chip-standardize":
        mean = x.mean(dim=(2, 3), keepdim=True)
        std = x.std(dim=(2, 3), keepdim=True).clamp_min(1e-6)
        x = (x - mean) / std
    else:  # timm-default: scale to [0, 1] from the chip's own range
        lo = x.amin(dim=(2, 3), keepdim=True)
        hi = x.amax(dim=(2, 3), keepdim=True)
        x = (x - lo) / (hi - lo).clamp_min(1e-6)
    return x[0]


def export_embeddings(chips_dir, spec: ModelSpec, out_path) -> int:
    """Embed every chip and write the CSV; returns the number of skipped
    (unreadable) chips.  Callers should treat a nonzero return as a failed
    run even though the readable rows were written."""
    meta, chips = discover_chips(chips_dir)
    missing = [b for b in spec.bands if b not in meta["bands"]]
    if missing:
        raise ChipError(
            f"chips lack bands {missing}; {META_NAME} lists {meta['bands']}"
        )
    encoder = load_encoder(spec)

    previous_threads = torch.get_num_threads()
    torch.set_num_threads(1)  # bit-stable runs whatever the host's default is
    try:
        rows: list[tuple[int, int, np.ndarray]] = []
        skipped = 0
        pending: list[tuple[int, int, torch.Tensor]] = []

        def flush():
            nonlocal rows
            if not pending:
                return
            batch = torch.stack([t for _, _, t in pending])
            out = encoder.embed(batch).numpy()
            if not np.all(np.isfinite(out)):
                raise ModelError("encoder produced non-finite values")
            for (row, col, _), vec in zip(pending, out):
                rows.append((row, col, vec))
            pending.clear()

        for row, col, path in chips:
            try:
                bands = read_chip(path)
                tensor = _prepare(bands, meta["bands"], spec, encoder.norm)
            except (OSError, ChipError, ValueError) as bad:
                logger.warning("skipping chip %s: %s", path.name, bad)
                skipped += 1
                continue
            pending.append((row, col, tensor))
            if len(pending) >= _BATCH:
                flush()
        flush()
    finally:
        torch.set_num_threads(previous_threads)

    if not rows:
        raise ChipError("no chip could be embedded")
    dims = {vec.shape[0] for _, _, vec in rows}
    if dims != {encoder.dimension}:
        raise ModelError(f"inconsistent embedding dimensions: {sorted(dims)}")

    dim = encoder.dimension
    lines = [
        f"# source={spec.model} dim={dim} pooling={spec.pooling} "
        f"resize={spec.resize} weights={spec.weights} norm={encoder.norm}"
    ]
    lines.append("row,col," + ",".join(f"f{i}" for i in range(dim)))
    for row, col, vec in rows:
        lines.append(f"{row},{col}," + ",".join(f"{float(v):.6g}" for v in vec))
    out_path = Path(out_path)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    logger.info("wrote %d embeddings of dimension %d to %s (skipped %d)",
                len(rows), dim, out_path, skipped)
    return skipped
