"""Analytic compute model for the five evaluated stereo architectures.

Closed-form counts for correlation planes, ViT patch grids, self-attention
scaling, depthwise-separable GRU gates and ghost convolutions, plus tabulated
per-variant descriptors. The formulas are cross-checked against counted
forward passes in :mod:`branchstereo.kernels`.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

DEFAULT_CROP = (384, 512)
VIT_PATCH_PX = 14
REFERENCE_DECODER_LAYERS = 66


def corr_planes(levels: int, radius: int) -> int:
    """Feature planes sampled from a 1-D correlation pyramid: levels*(2r+1)."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if radius < 0:
        raise ValueError("radius must be >= 0")
    return levels * (2 * radius + 1)


def patch_grid(crop_h: int, crop_w: int, scale: float, patch: int = VIT_PATCH_PX) -> int:
    """Number of transformer tokens for a crop processed at a given scale."""
    if crop_h <= 0 or crop_w <= 0 or patch <= 0:
        raise ValueError("dimensions must be positive")
    if not 0 < scale <= 1:
        raise ValueError(f"scale must be in (0, 1], got {scale}")
    rows = math.floor(crop_h * scale / patch)
    cols = math.floor(crop_w * scale / patch)
    if rows == 0 or cols == 0:
        raise ValueError(
            f"patch grid collapsed to zero for crop {crop_h}x{crop_w} at scale {scale}"
        )
    return rows * cols


def attention_speedup(tokens_a: int, tokens_b: int) -> float:
    """Quadratic self-attention cost ratio between two token counts."""
    return (tokens_a / tokens_b) ** 2


def ds_gru_ratio(channels: int) -> float:
    """Per-gate MAC ratio of dense 3x3 conv to depthwise-3x3 + pointwise.

    Dense: 9*c^2. Separable: 9*c + c^2. Ratio simplifies to 9c/(9+c),
    approaching 9 from below as channels grow.
    """
    if channels < 1:
        raise ValueError("channels must be >= 1")
    return 9 * channels / (9 + channels)


def ghost_reduction(in_c: int, out_c: int) -> float:
    """FLOP fraction saved by producing half the channels via cheap transforms.

    Dense 3x3: 9*in_c*out_c. Ghost: dense for out_c/2 plus depthwise 3x3 for
    the other out_c/2.
    """
    if in_c < 1 or out_c < 1:
        raise ValueError("channel counts must be >= 1")
    dense = 9.0 * in_c * out_c
    ghost = 9.0 * in_c * (out_c / 2.0) + 9.0 * (out_c / 2.0)
    return 1.0 - ghost / dense


@dataclass(frozen=True)
class VariantSpec:
    """Architecture descriptor for one evaluated model variant."""

    name: str
    backbone: str
    dinov2_scale: float
    patch_size: int
    extracted_layers: int
    decoder_name: str
    decoder_conv_layers: int
    gru_levels: int
    gru_hidden: int
    fnet_dim: int
    corr_levels: int
    corr_radius: int
    scale_corr_planes: int | None  # tabulated; no single formula fits all variants
    iters_train: int
    iters_scale: int
    iters_valid: int
    uses_ghost: bool = False
    uses_ds_gru: bool = False

    def __post_init__(self) -> None:
        counts = (
            self.patch_size, self.extracted_layers, self.decoder_conv_layers,
            self.gru_levels, self.gru_hidden, self.fnet_dim, self.corr_levels,
            self.iters_train, self.iters_scale, self.iters_valid,
        )
        if any(c < 1 for c in counts) or self.corr_radius < 0:
            raise ValueError(f"variant {self.name}: counts must be positive")
        if self.scale_corr_planes is not None and self.scale_corr_planes < 1:
            raise ValueError(f"variant {self.name}: scale_corr_planes must be positive")


PRESETS: dict[str, VariantSpec] = {
    "vits": VariantSpec(
        name="vits", backbone="ViT-S", dinov2_scale=1.0, patch_size=VIT_PATCH_PX,
        extracted_layers=4, decoder_name="dual-dpt-refinenet", decoder_conv_layers=66,
        gru_levels=3, gru_hidden=128, fnet_dim=256, corr_levels=2, corr_radius=4,
        scale_corr_planes=40, iters_train=18, iters_scale=8, iters_valid=32,
    ),
    "vitl": VariantSpec(
        name="vitl", backbone="ViT-L", dinov2_scale=1.0, patch_size=VIT_PATCH_PX,
        extracted_layers=4, decoder_name="dual-dpt-refinenet", decoder_conv_layers=66,
        gru_levels=3, gru_hidden=128, fnet_dim=256, corr_levels=2, corr_radius=4,
        scale_corr_planes=40, iters_train=18, iters_scale=8, iters_valid=32,
    ),
    "pruneplus": VariantSpec(
        name="pruneplus", backbone="ViT-S", dinov2_scale=1.0, patch_size=VIT_PATCH_PX,
        extracted_layers=3, decoder_name="enhanced-dpt", decoder_conv_layers=14,
        gru_levels=2, gru_hidden=128, fnet_dim=192, corr_levels=2, corr_radius=4,
        scale_corr_planes=25, iters_train=14, iters_scale=4, iters_valid=20,
    ),
    "prunestereo": VariantSpec(
        name="prunestereo", backbone="ViT-S", dinov2_scale=0.75, patch_size=VIT_PATCH_PX,
        extracted_layers=2, decoder_name="fast-dpt", decoder_conv_layers=6,
        gru_levels=2, gru_hidden=96, fnet_dim=128, corr_levels=1, corr_radius=3,
        scale_corr_planes=9, iters_train=10, iters_scale=3, iters_valid=12,
    ),
    "prunenano": VariantSpec(
        name="prunenano", backbone="ViT-S", dinov2_scale=0.5, patch_size=VIT_PATCH_PX,
        extracted_layers=1, decoder_name="turbo+ghost", decoder_conv_layers=3,
        gru_levels=2, gru_hidden=64, fnet_dim=96, corr_levels=1, corr_radius=2,
        scale_corr_planes=None, iters_train=7, iters_scale=2, iters_valid=9,
        uses_ghost=True, uses_ds_gru=True,
    ),
}


def gru_macs_per_pixel_per_iter(spec: VariantSpec) -> int:
    """Gate-convolution MACs per pixel for one recurrent update.

    Assumes each gate convolves the concatenation of hidden state and a
    same-width input (2c channels in, c out); three gates per cell, one cell
    per GRU level. Bias and activation costs excluded.
    """
    c = spec.gru_hidden
    if spec.uses_ds_gru:
        per_gate = 9 * (2 * c) + (2 * c) * c
    else:
        per_gate = 9 * (2 * c) * c
    return spec.gru_levels * 3 * per_gate


@dataclass(frozen=True)
class CostBreakdown:
    variant: str
    attention_tokens: int
    corr_planes_standard: int
    corr_planes_scale: int | None
    gru_macs_per_pixel_per_iter: int
    decoder_relative_depth: float
    notes: str


def variant_cost_summary(spec: VariantSpec, crop: tuple[int, int] = DEFAULT_CROP) -> CostBreakdown:
    tokens = patch_grid(crop[0], crop[1], spec.dinov2_scale, spec.patch_size)
    notes = []
    if spec.dinov2_scale < 1.0:
        full = patch_grid(crop[0], crop[1], 1.0, spec.patch_size)
        notes.append(f"self-attention speedup {attention_speedup(full, tokens):.2f}x vs full scale")
    if spec.uses_ds_gru:
        notes.append(f"DS-GRU gate MAC ratio {ds_gru_ratio(spec.gru_hidden):.2f}x vs dense")
    if spec.uses_ghost:
        notes.append(
            f"ghost conv saves {100 * ghost_reduction(spec.fnet_dim, spec.fnet_dim):.1f}% per layer"
        )
    return CostBreakdown(
        variant=spec.name,
        attention_tokens=tokens,
        corr_planes_standard=corr_planes(spec.corr_levels, spec.corr_radius),
        corr_planes_scale=spec.scale_corr_planes,
        gru_macs_per_pixel_per_iter=gru_macs_per_pixel_per_iter(spec),
        decoder_relative_depth=spec.decoder_conv_layers / REFERENCE_DECODER_LAYERS,
        notes="; ".join(notes) or "reference configuration",
    )


COST_COLUMNS = (
    "variant", "attention_tokens", "corr_planes_standard", "corr_planes_scale",
    "gru_macs_per_pixel_per_iter", "decoder_relative_depth",
    "tokens_vs_vits", "gru_macs_vs_vits", "notes",
)


def cost_table(crop: tuple[int, int] = DEFAULT_CROP) -> list[dict]:
    """Per-preset cost breakdown with ratio columns against the ViT-S preset."""
    reference = variant_cost_summary(PRESETS["vits"], crop)
    rows = []
    for name in PRESETS:
        bd = variant_cost_summary(PRESETS[name], crop)
        row = asdict(bd)
        row["tokens_vs_vits"] = bd.attention_tokens / reference.attention_tokens
        row["gru_macs_vs_vits"] = (
            bd.gru_macs_per_pixel_per_iter / reference.gru_macs_per_pixel_per_iter
        )
        rows.append(row)
    return rows


def write_cost_csv(path: str | Path, crop: tuple[int, int] = DEFAULT_CROP) -> None:
    rows = cost_table(crop)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=COST_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


def write_cost_json(path: str | Path, crop: tuple[int, int] = DEFAULT_CROP) -> None:
    Path(path).write_text(json.dumps(cost_table(crop), indent=2))
