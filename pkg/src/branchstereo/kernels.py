"""Forward-only reference micro-kernels with exact MAC counting.

Small dense tensors only (desk scale). Every convolution goes through
:func:`conv2d`, which counts multiply-accumulates as it computes, so counted
costs can be checked against the closed forms in :mod:`branchstereo.costmodel`
with integer equality. Bias additions and activations are not counted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class MacCounter:
    total: int = 0

    def add(self, n: int) -> None:
        self.total += int(n)

    def reset(self) -> None:
        self.total = 0


def conv2d(
    x: np.ndarray,
    w: np.ndarray,
    counter: MacCounter | None = None,
    groups: int = 1,
) -> np.ndarray:
    """'Same'-padded stride-1 2-D convolution over a (C, H, W) tensor.

    Weights have shape (out_c, in_c // groups, k, k) with odd k.
    """
    c, h, wd = x.shape
    out_c, in_per_group, kh, kw = w.shape
    if kh != kw or kh % 2 == 0:
        raise ValueError(f"kernel must be odd and square, got {kh}x{kw}")
    if c % groups or out_c % groups or in_per_group != c // groups:
        raise ValueError(
            f"shape mismatch: input {c} channels, weights {w.shape}, groups {groups}"
        )
    pad = kh // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    # im2col: (groups, in_per_group*k*k, H*W)
    cols = np.empty((groups, in_per_group * kh * kw, h * wd), dtype=np.float64)
    for g in range(groups):
        idx = 0
        for ci in range(in_per_group):
            ch = g * in_per_group + ci
            for dy in range(kh):
                for dx in range(kw):
                    cols[g, idx] = xp[ch, dy : dy + h, dx : dx + wd].ravel()
                    idx += 1
    wg = w.reshape(groups, out_c // groups, in_per_group * kh * kw)
    out = np.einsum("gok,gkp->gop", wg, cols).reshape(out_c, h, wd)
    if counter is not None:
        counter.add(h * wd * kh * kw * in_per_group * out_c)
    return out


def depthwise_conv2d(x: np.ndarray, w: np.ndarray, counter: MacCounter | None = None) -> np.ndarray:
    """3x3-style depthwise convolution: one filter per channel."""
    return conv2d(x, w, counter, groups=x.shape[0])


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def _fan_in_scale(w: np.ndarray) -> np.ndarray:
    fan_in = int(np.prod(w.shape[1:]))
    return w / np.sqrt(fan_in)


@dataclass
class GruWeights:
    """Dense ConvGRU gate weights: each gate sees concat(hidden, input)."""

    wz: np.ndarray
    wr: np.ndarray
    wq: np.ndarray

    @classmethod
    def seeded(cls, channels: int, seed: int = 0) -> "GruWeights":
        rng = np.random.default_rng(seed)
        shape = (channels, 2 * channels, 3, 3)
        return cls(*(_fan_in_scale(rng.standard_normal(shape)) for _ in range(3)))


@dataclass
class DsGruWeights:
    """Depthwise + pointwise factorization of each gate convolution."""

    dw_z: np.ndarray
    pw_z: np.ndarray
    dw_r: np.ndarray
    pw_r: np.ndarray
    dw_q: np.ndarray
    pw_q: np.ndarray

    @classmethod
    def seeded(cls, channels: int, seed: int = 0) -> "DsGruWeights":
        rng = np.random.default_rng(seed)
        dw_shape = (2 * channels, 1, 3, 3)
        pw_shape = (channels, 2 * channels, 1, 1)
        parts = []
        for _ in range(3):
            parts.append(_fan_in_scale(rng.standard_normal(dw_shape)))
            parts.append(_fan_in_scale(rng.standard_normal(pw_shape)))
        return cls(*parts)


def conv_gru_step(
    h: np.ndarray, x: np.ndarray, weights: GruWeights, counter: MacCounter | None = None
) -> np.ndarray:
    """One dense ConvGRU update; hidden state stays in [-1, 1]."""
    hx = np.concatenate([h, x], axis=0)
    z = _sigmoid(conv2d(hx, weights.wz, counter))
    r = _sigmoid(conv2d(hx, weights.wr, counter))
    rhx = np.concatenate([r * h, x], axis=0)
    q = np.tanh(conv2d(rhx, weights.wq, counter))
    return (1.0 - z) * h + z * q


def ds_gru_step(
    h: np.ndarray, x: np.ndarray, weights: DsGruWeights, counter: MacCounter | None = None
) -> np.ndarray:
    """One depthwise-separable GRU update; same interface as conv_gru_step."""
    hx = np.concatenate([h, x], axis=0)
    z = _sigmoid(conv2d(depthwise_conv2d(hx, weights.dw_z, counter), weights.pw_z, counter))
    r = _sigmoid(conv2d(depthwise_conv2d(hx, weights.dw_r, counter), weights.pw_r, counter))
    rhx = np.concatenate([r * h, x], axis=0)
    q = np.tanh(conv2d(depthwise_conv2d(rhx, weights.dw_q, counter), weights.pw_q, counter))
    return (1.0 - z) * h + z * q


@dataclass
class GhostWeights:
    """Primary dense 3x3 producing half the channels; cheap depthwise for the rest."""

    primary: np.ndarray
    cheap: np.ndarray

    @classmethod
    def seeded(cls, in_c: int, out_c: int, seed: int = 0) -> "GhostWeights":
        if out_c % 2:
            raise ValueError("ghost convolution needs an even output channel count")
        rng = np.random.default_rng(seed)
        primary = _fan_in_scale(rng.standard_normal((out_c // 2, in_c, 3, 3)))
        cheap = _fan_in_scale(rng.standard_normal((out_c // 2, 1, 3, 3)))
        return cls(primary, cheap)

    @classmethod
    def identity_cheap(cls, primary: np.ndarray) -> "GhostWeights":
        """Cheap transform that copies the primary half verbatim."""
        half = primary.shape[0]
        cheap = np.zeros((half, 1, 3, 3))
        cheap[:, 0, 1, 1] = 1.0
        return cls(primary, cheap)


def ghost_conv_forward(
    x: np.ndarray, weights: GhostWeights, counter: MacCounter | None = None
) -> np.ndarray:
    """Ghost convolution forward pass: output shape matches a dense conv."""
    primary = conv2d(x, weights.primary, counter)
    cheap = depthwise_conv2d(primary, weights.cheap, counter)
    return np.concatenate([primary, cheap], axis=0)


@dataclass
class CorrelationSamplerOutput:
    planes: np.ndarray  # (levels*(2r+1), H, W)
    macs: int


def build_correlation_volume(
    feat_left: np.ndarray, feat_right: np.ndarray, counter: MacCounter | None = None
) -> np.ndarray:
    """All-pairs 1-D correlation: (H, W, W) dot products along the scanline."""
    c, h, w = feat_left.shape
    vol = np.einsum("chx,chy->hxy", feat_left, feat_right) / np.sqrt(c)
    if counter is not None:
        counter.add(h * w * w * c)
    return vol


def sample_correlation(
    volume: np.ndarray, disp: np.ndarray, levels: int, radius: int
) -> np.ndarray:
    """Sample correlation planes around the current disparity estimate.

    The volume's disparity axis is average-pooled per level; each level
    contributes (2*radius + 1) linearly interpolated planes, for a total of
    levels*(2r+1), matching the analytic plane count.
    """
    h, w, d = volume.shape
    if disp.shape != (h, w):
        raise ValueError(f"disparity shape {disp.shape} does not match volume {(h, w)}")
    planes = []
    vol = volume
    for level in range(levels):
        d_level = vol.shape[2]
        centers = disp / (2**level)
        for offset in range(-radius, radius + 1):
            pos = np.clip(centers + offset, 0, d_level - 1)
            lo = np.floor(pos).astype(np.int64)
            hi = np.minimum(lo + 1, d_level - 1)
            frac = pos - lo
            rows = np.arange(h)[:, None]
            cols = np.arange(w)[None, :]
            planes.append((1 - frac) * vol[rows, cols, lo] + frac * vol[rows, cols, hi])
        if level + 1 < levels:
            trimmed = vol[:, :, : d_level // 2 * 2]
            vol = trimmed.reshape(h, w, -1, 2).mean(axis=3)
    return np.stack(planes, axis=0)


# closed-form counterparts of the counted kernels, for integer cross-checks

def conv2d_macs(h: int, w: int, in_c: int, out_c: int, k: int = 3, groups: int = 1) -> int:
    return h * w * k * k * (in_c // groups) * out_c


def conv_gru_macs(h: int, w: int, channels: int) -> int:
    return 3 * conv2d_macs(h, w, 2 * channels, channels)


def ds_gru_macs(h: int, w: int, channels: int) -> int:
    depthwise = conv2d_macs(h, w, 2 * channels, 2 * channels, k=3, groups=2 * channels)
    pointwise = conv2d_macs(h, w, 2 * channels, channels, k=1)
    return 3 * (depthwise + pointwise)


def ghost_conv_macs(h: int, w: int, in_c: int, out_c: int) -> int:
    half = out_c // 2
    return conv2d_macs(h, w, in_c, half) + conv2d_macs(h, w, half, half, k=3, groups=half)
