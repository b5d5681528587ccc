"""Classical coarse-to-fine correlation stereo matcher.

Zero-mean normalized cross-correlation over an image pyramid, with optional
parabolic sub-pixel refinement and left-right consistency masking. Intended
as a dependency-free baseline so the full evaluation pipeline runs without a
neural model.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .geometry import DisparityMap

_EPS = 1e-6
_MIN_TEXTURE_STD = 1e-3  # relative to the image std; gates flat windows
_MIN_ZNCC = 0.3


@dataclass(frozen=True)
class MatchConfig:
    pyramid_levels: int = 2
    window_radius: int = 4
    search_radius_per_level: int = 4
    max_disparity: int = 128
    lr_consistency_tol: float = 1.0
    subpixel: bool = True

    def __post_init__(self) -> None:
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if self.window_radius < 1:
            raise ValueError("window_radius must be >= 1")
        if self.max_disparity < 1:
            raise ValueError("max_disparity must be >= 1")


def _to_gray(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image, dtype=np.float32)
    if img.ndim == 3:
        img = img.mean(axis=2)
    if img.ndim != 2:
        raise ValueError(f"expected HxW or HxWxC image, got shape {image.shape}")
    return img


def _downsample(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    h2, w2 = h // 2 * 2, w // 2 * 2
    boxed = img[:h2, :w2].reshape(h2 // 2, 2, w2 // 2, 2).mean(axis=(1, 3))
    return boxed


def _window_stats(img: np.ndarray, radius: int) -> tuple[np.ndarray, np.ndarray]:
    size = 2 * radius + 1
    mean = ndimage.uniform_filter(img, size=size, mode="nearest")
    sq = ndimage.uniform_filter(img * img, size=size, mode="nearest")
    var = np.maximum(sq - mean * mean, 0.0)
    return mean, np.sqrt(var)


def _zncc_costs(
    left: np.ndarray,
    right: np.ndarray,
    candidates: np.ndarray,  # (K, H, W) integer disparity per candidate
    radius: int,
) -> np.ndarray:
    """ZNCC score for every per-pixel candidate disparity; -inf where unusable."""
    h, w = left.shape
    xs = np.arange(w)[None, :]
    mean_l, std_l = _window_stats(left, radius)
    texture_floor = _MIN_TEXTURE_STD * max(float(left.std()), _EPS)
    scores = np.full(candidates.shape, -np.inf, dtype=np.float32)
    for k in range(candidates.shape[0]):
        d = candidates[k]
        src_x = xs - d
        in_bounds = (src_x >= 0) & (src_x < w) & (d >= 0)
        gathered = right[np.arange(h)[:, None], np.clip(src_x, 0, w - 1)]
        mean_r, std_r = _window_stats(gathered, radius)
        cross = ndimage.uniform_filter(left * gathered, size=2 * radius + 1, mode="nearest")
        denom = std_l * std_r
        zncc = (cross - mean_l * mean_r) / np.maximum(denom, _EPS)
        usable = in_bounds & (std_l > texture_floor) & (std_r > texture_floor)
        scores[k] = np.where(usable, zncc, -np.inf)
    return scores


def _match_one_direction(left: np.ndarray, right: np.ndarray, cfg: MatchConfig) -> tuple[np.ndarray, np.ndarray]:
    """Returns (disparity float32, valid bool) for the left image."""
    pyramid = [(left, right)]
    for _ in range(cfg.pyramid_levels - 1):
        l, r = pyramid[-1]
        pyramid.append((_downsample(l), _downsample(r)))

    disp = None
    for level in reversed(range(cfg.pyramid_levels)):
        l, r = pyramid[level]
        h, w = l.shape
        if disp is None:
            # coarsest level: full search up to the scaled disparity cap
            d_max = max(1, int(np.ceil(cfg.max_disparity / 2**level)))
            base = np.zeros((h, w), dtype=np.int32)
            offsets = np.arange(0, d_max + 1)
        else:
            up = np.repeat(np.repeat(disp * 2.0, 2, axis=0), 2, axis=1)[:h, :w]
            if up.shape != (h, w):  # odd dimensions: pad with edge values
                pad_h, pad_w = h - up.shape[0], w - up.shape[1]
                up = np.pad(up, ((0, pad_h), (0, pad_w)), mode="edge")
            base = np.rint(up).astype(np.int32)
            offsets = np.arange(-cfg.search_radius_per_level, cfg.search_radius_per_level + 1)

        candidates = base[None] + offsets[:, None, None]
        scores = _zncc_costs(l, r, candidates, cfg.window_radius)
        # ascending candidate order makes argmax tie-break toward smaller disparity
        best = scores.argmax(axis=0)
        best_score = np.take_along_axis(scores, best[None], axis=0)[0]
        disp_level = np.take_along_axis(candidates, best[None], axis=0)[0].astype(np.float32)

        if cfg.subpixel and len(offsets) >= 3:
            interior = (best > 0) & (best < len(offsets) - 1)
            c0 = np.take_along_axis(scores, np.maximum(best - 1, 0)[None], axis=0)[0]
            c2 = np.take_along_axis(scores, np.minimum(best + 1, len(offsets) - 1)[None], axis=0)[0]
            with np.errstate(invalid="ignore"):
                denom = c0 + c2 - 2 * best_score
                ok = interior & np.isfinite(c0) & np.isfinite(c2) & (denom < -_EPS)
                shift = np.where(
                    ok, 0.5 * (np.nan_to_num(c0 - c2)) / np.where(ok, denom, -1.0), 0.0
                )
            disp_level = disp_level + np.clip(shift, -0.5, 0.5).astype(np.float32)

        disp = disp_level
        last_valid = np.isfinite(best_score) & (best_score > _MIN_ZNCC)

    return disp, last_valid


def match(left: np.ndarray, right: np.ndarray, cfg: MatchConfig | None = None) -> DisparityMap:
    """Dense disparity of the rectified pair; unmatched pixels are invalid.

    Degenerate texture-free inputs produce an all-invalid map, not an error.
    """
    cfg = cfg or MatchConfig()
    l = _to_gray(left)
    r = _to_gray(right)
    if l.shape != r.shape:
        raise ValueError(f"image dimensions differ: {l.shape} vs {r.shape}")

    disp_l, valid_l = _match_one_direction(l, r, cfg)
    # right-to-left pass via horizontal flips, for the consistency check
    disp_r, valid_r = _match_one_direction(r[:, ::-1], l[:, ::-1], cfg)
    disp_r = disp_r[:, ::-1]
    valid_r = valid_r[:, ::-1]

    h, w = l.shape
    xs = np.arange(w)[None, :]
    match_x = np.clip(np.rint(xs - disp_l).astype(np.int64), 0, w - 1)
    rows = np.arange(h)[:, None]
    lr_ok = (
        valid_r[rows, match_x]
        & (np.abs(disp_l - disp_r[rows, match_x]) <= cfg.lr_consistency_tol)
    )
    # sub-pixel refinement around d=0 may dip slightly negative; clamp to zero
    disp_l = np.maximum(disp_l, 0.0)
    valid = valid_l & lr_ok & (disp_l <= cfg.max_disparity)
    values = np.where(valid, disp_l, 0.0).astype(np.float32)
    return DisparityMap(values=values, valid=valid)


def match_with_max_disparity(left: np.ndarray, right: np.ndarray, max_disparity: int,
                             cfg: MatchConfig | None = None) -> DisparityMap:
    """Convenience wrapper clamping the search range to a rig's disparity cap."""
    cfg = replace(cfg or MatchConfig(), max_disparity=int(max_disparity))
    return match(left, right, cfg)
