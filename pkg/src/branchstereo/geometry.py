"""Disparity <-> metric depth conversion for a rectified stereo rig.

All maps carry an explicit validity mask; conversions never throw on bad
pixels, they propagate invalidity instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Simulated ZED Mini defaults (focal length in pixels, baseline in meters).
DEFAULT_FOCAL_PX = 933.33
DEFAULT_BASELINE_M = 0.063
DEFAULT_MAX_DISPARITY = 512.0


@dataclass(frozen=True)
class CameraRig:
    """Calibrated stereo geometry: Z = focal_px * baseline_m / disparity."""

    focal_px: float = DEFAULT_FOCAL_PX
    baseline_m: float = DEFAULT_BASELINE_M
    max_disparity: float = DEFAULT_MAX_DISPARITY

    def __post_init__(self) -> None:
        if self.focal_px <= 0:
            raise ValueError(f"focal_px must be positive, got {self.focal_px}")
        if self.baseline_m <= 0:
            raise ValueError(f"baseline_m must be positive, got {self.baseline_m}")
        if self.max_disparity <= 0:
            raise ValueError(f"max_disparity must be positive, got {self.max_disparity}")

    @property
    def focal_baseline(self) -> float:
        return self.focal_px * self.baseline_m

    @property
    def min_depth_m(self) -> float:
        """Depth at the disparity cap: the closest representable range."""
        return self.focal_baseline / self.max_disparity


def _as_readonly_f32(values: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(values, dtype=np.float32)
    if out.ndim != 2:
        raise ValueError(f"expected a 2-D grid, got shape {values.shape}")
    if out is values:
        out = out.copy()
    out.flags.writeable = False
    return out


def _as_readonly_mask(valid: np.ndarray | None, shape: tuple[int, int]) -> np.ndarray:
    if valid is None:
        out = np.ones(shape, dtype=bool)
    else:
        out = np.ascontiguousarray(valid, dtype=bool)
        if out.shape != shape:
            raise ValueError(f"mask shape {out.shape} does not match grid shape {shape}")
        if out is valid:
            out = out.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class DisparityMap:
    """Dense horizontal disparity in pixels with a validity mask."""

    values: np.ndarray
    valid: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        values = _as_readonly_f32(self.values)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", _as_readonly_mask(self.valid, values.shape))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def n_valid(self) -> int:
        return int(self.valid.sum())


@dataclass(frozen=True)
class DepthMap:
    """Dense metric depth in meters with a validity mask."""

    values: np.ndarray
    valid: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        values = _as_readonly_f32(self.values)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", _as_readonly_mask(self.valid, values.shape))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def n_valid(self) -> int:
        return int(self.valid.sum())


def disparity_to_depth(disp: DisparityMap, rig: CameraRig) -> DepthMap:
    """Z = focal_px * baseline_m / D per valid pixel; invalid stays invalid.

    Disparities outside (0, max_disparity] are additionally marked invalid
    rather than clamped, so they can never corrupt depth statistics.
    """
    d = disp.values
    valid = disp.valid & (d > 0) & (d <= rig.max_disparity)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(valid, rig.focal_baseline / d, 0.0).astype(np.float32)
    return DepthMap(values=z, valid=valid)


def depth_to_disparity(depth: DepthMap, rig: CameraRig) -> DisparityMap:
    """D = focal_px * baseline_m / Z; disparities above the cap become invalid."""
    z = depth.values
    valid = depth.valid & (z > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(valid, rig.focal_baseline / z, 0.0).astype(np.float32)
    valid = valid & (d <= rig.max_disparity)
    d = np.where(valid, d, 0.0).astype(np.float32)
    return DisparityMap(values=d, valid=valid)


def point_distance(disp: DisparityMap, rig: CameraRig, x: int, y: int) -> float | None:
    """Metric distance at one pixel, or None when no measurement exists there.

    Raises IndexError for out-of-bounds coordinates; an invalid pixel is not
    an error, it is a distinguishable no-measurement result.
    """
    if not (0 <= x < disp.width and 0 <= y < disp.height):
        raise IndexError(
            f"pixel ({x}, {y}) outside {disp.width}x{disp.height} disparity map"
        )
    if not disp.valid[y, x]:
        return None
    d = float(disp.values[y, x])
    if d <= 0 or d > rig.max_disparity:
        return None
    return rig.focal_baseline / d
