"""Encoder registry and loading.

Three model identities are supported:

* ``vit_base_patch14_dinov2.lvd142m`` - generic ViT, RGB input, class-token
  pooling, 518 px input.  Served through timm with downloaded weights.
* ``convnext_base.fb_in22k`` - generic CNN, RGB input, global average
  pooling, 224 px input.  Served through timm with downloaded weights.
* ``croma`` - multispectral (12-band Sentinel-2 style) ViT encoder with
  2D-ALiBi attention bias and mean-token pooling, 120 px input at 8 px
  patches.  Implemented locally; weights come from a checkpoint file.

Weight resolution accepts three forms: ``pretrained`` (download through the
backing library, generic models only), a filesystem path to a checkpoint,
or ``random:<seed>`` which initializes the architecture deterministically
from the seed.  Random weights exist for smoke tests and plumbing checks;
the provenance string lands in the output header so downstream consumers
can never mistake them for a trained model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import torch
import torch.nn as nn


class ModelError(RuntimeError):
    pass


S2_BANDS = (
    "B01", "B02", "B03", "B04", "B05", "B06",
    "B07", "B08", "B8A", "B09", "B11", "B12",
)

_REGISTRY = {
    "vit_base_patch14_dinov2.lvd142m": {
        "backend": "timm",
        "channels": 3,
        "bands": ("red", "green", "blue"),
        "pooling": "cls",
        "resize": 518,
    },
    "convnext_base.fb_in22k": {
        "backend": "timm",
        "channels": 3,
        "bands": ("red", "green", "blue"),
        "pooling": "avg",
        "resize": 224,
    },
    "croma": {
        "backend": "local",
        "channels": 12,
        "bands": S2_BANDS,
        "pooling": "mean",
        "resize": 120,
    },
}

MODEL_IDS = tuple(_REGISTRY)


@dataclass(frozen=True)
class ModelSpec:
    model: str
    bands: tuple[str, ...]
    pooling: str
    resize: int
    weights: str = "pretrained"

    @property
    def backend(self) -> str:
        return _REGISTRY[self.model]["backend"]


def make_spec(
    model: str,
    bands=None,
    resize: int | None = None,
    weights: str = "pretrained",
) -> ModelSpec:
    """Build a validated spec; band selection must match the model's channel
    count (RGB for the generic models, 12 bands for croma)."""
    if model not in _REGISTRY:
        raise ModelError(f"unknown model {model!r}; expected one of {MODEL_IDS}")
    entry = _REGISTRY[model]
    bands = tuple(bands) if bands is not None else entry["bands"]
    if len(bands) != entry["channels"]:
        raise ModelError(
            f"{model} expects {entry['channels']} input bands, got {len(bands)}: {bands}"
        )
    return ModelSpec(
        model=model,
        bands=bands,
        pooling=entry["pooling"],
        resize=int(resize) if resize else entry["resize"],
        weights=weights,
    )


# ---------------------------------------------------------------------------
# Local multispectral ViT (croma-style)
# ---------------------------------------------------------------------------


def _alibi_bias_2d(grid: int, heads: int) -> torch.Tensor:
    """Per-head attention bias: minus Euclidean patch distance times a
    geometric per-head slope (2D ALiBi)."""
    coords = torch.stack(
        torch.meshgrid(torch.arange(grid), torch.arange(grid), indexing="ij"), dim=-1
    ).reshape(-1, 2).float()
    dist = torch.cdist(coords, coords)
    slopes = torch.tensor([2.0 ** (-8.0 * (h + 1) / heads) for h in range(heads)])
    return -slopes[:, None, None] * dist[None]


class _Block(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.norm1 = nn.LayerNorm(dim)
        self.qkv = nn.Linear(dim, dim * 3)
        self.proj = nn.Linear(dim, dim)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, dim * 4), nn.GELU(), nn.Linear(dim * 4, dim)
        )

    def forward(self, x: torch.Tensor, bias: torch.Tensor) -> torch.Tensor:
        b, n, d = x.shape
        h = self.heads
        q, k, v = self.qkv(self.norm1(x)).chunk(3, dim=-1)
        q = q.view(b, n, h, d // h).transpose(1, 2)
        k = k.view(b, n, h, d // h).transpose(1, 2)
        v = v.view(b, n, h, d // h).transpose(1, 2)
        att = (q @ k.transpose(-2, -1)) / math.sqrt(d // h) + bias
        att = att.softmax(dim=-1)
        x = x + self.proj((att @ v).transpose(1, 2).reshape(b, n, d))
        return x + self.mlp(self.norm2(x))


class MultispectralViT(nn.Module):
    """Plain pre-norm ViT over multispectral patches with a fixed 2D-ALiBi
    attention bias instead of learned position embeddings; mean pooling."""

    def __init__(
        self,
        in_chans: int = 12,
        img_size: int = 120,
        patch: int = 8,
        dim: int = 768,
        depth: int = 12,
        heads: int = 12,
    ):
        super().__init__()
        if img_size % patch:
            raise ModelError(f"input size {img_size} not divisible by patch size {patch}")
        self.dim = dim
        self.patch_embed = nn.Conv2d(in_chans, dim, kernel_size=patch, stride=patch)
        self.blocks = nn.ModuleList(_Block(dim, heads) for _ in range(depth))
        self.norm = nn.LayerNorm(dim)
        self.register_buffer("alibi", _alibi_bias_2d(img_size // patch, heads))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.patch_embed(x).flatten(2).transpose(1, 2)  # b, tokens, dim
        for block in self.blocks:
            x = block(x, self.alibi)
        return self.norm(x).mean(dim=1)


def _init_random(module: nn.Module, seed: int) -> None:
    gen = torch.Generator().manual_seed(seed)
    for m in module.modules():
        if isinstance(m, (nn.Linear, nn.Conv2d)):
            with torch.no_grad():
                m.weight.normal_(0.0, 0.02, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()
        elif isinstance(m, nn.LayerNorm):
            with torch.no_grad():
                m.weight.fill_(1.0)
                m.bias.zero_()


def _parse_random(weights: str) -> int | None:
    if weights.startswith("random:"):
        try:
            return int(weights.split(":", 1)[1])
        except ValueError:
            raise ModelError(f"bad random weights spec {weights!r}; use random:<seed>") from None
    return None


class Encoder:
    """A loaded model plus everything needed to run and describe it."""

    def __init__(self, module: nn.Module, spec: ModelSpec, dimension: int, norm: str):
        self.module = module.eval()
        self.spec = spec
        self.dimension = dimension
        self.norm = norm

    @torch.no_grad()
    def embed(self, batch: torch.Tensor) -> torch.Tensor:
        return self.module(batch)


def load_encoder(spec: ModelSpec) -> Encoder:
    """Resolve weights and build the encoder; raises ModelError when the
    weights are unobtainable (missing library, no checkpoint, download
    failure)."""
    if spec.backend == "local":
        model = MultispectralViT(in_chans=len(spec.bands), img_size=spec.resize)
        seed = _parse_random(spec.weights)
        if seed is not None:
            _init_random(model, seed)
        elif Path(spec.weights).is_file():
            state = torch.load(spec.weights, map_location="cpu", weights_only=True)
            try:
                model.load_state_dict(state)
            except RuntimeError as bad:
                raise ModelError(f"checkpoint {spec.weights} does not fit croma: {bad}") from None
        else:
            raise ModelError(
                f"croma weights {spec.weights!r} not found; pass a checkpoint path "
                "or random:<seed> for a smoke run"
            )
        return Encoder(model, spec, model.dim, norm="per-chip-standardize")

    # timm backend: pretrained download or checkpoint path
    seed = _parse_random(spec.weights)
    try:
        import timm
    except ImportError:
        raise ModelError(
            f"{spec.model} needs the timm library, which is not installed"
        ) from None
    try:
        if seed is not None:
            model = timm.create_model(spec.model, pretrained=False, num_classes=0)
            _init_random(model, seed)
        elif Path(spec.weights).is_file():
            model = timm.create_model(
                spec.model, pretrained=True, num_classes=0,
                pretrained_cfg_overlay={"file": spec.weights},
            )
        else:
            model = timm.create_model(spec.model, pretrained=True, num_classes=0)
    except (OSError, RuntimeError, ValueError) as bad:
        raise ModelError(f"could not obtain weights for {spec.model}: {bad}") from None
    dimension = int(model.num_features)
    return Encoder(model, spec, dimension, norm="timm-default")
