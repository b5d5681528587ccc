"""Deployment-side analysis: latency profiling, branch distance, decisions.

Everything the UAV controller consumes lives here: wall-clock frame
profiling, travel-per-update arithmetic, robust ROI distance estimation,
temporal median filtering, and the approach/actuation and deployability
classifiers.
"""

from __future__ import annotations

import json
import statistics
import time
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np

from .geometry import CameraRig, DisparityMap, disparity_to_depth

TIMER_FLOOR_MS = 0.1  # monotonic-clock resolution floor


@dataclass(frozen=True)
class LatencyReport:
    warmup_frames: int
    measured_frames: int
    per_frame_ms: tuple[float, ...]
    mean_ms: float
    median_ms: float
    p95_ms: float
    fps: float
    resolution: tuple[int, int] | None = None
    label: str = "runner"

    def to_json(self, path: str | Path) -> None:
        payload = {
            "label": self.label,
            "warmup_frames": self.warmup_frames,
            "measured_frames": self.measured_frames,
            "mean_ms": self.mean_ms,
            "median_ms": self.median_ms,
            "p95_ms": self.p95_ms,
            "fps": self.fps,
            "resolution": list(self.resolution) if self.resolution else None,
            "per_frame_ms": list(self.per_frame_ms),
        }
        Path(path).write_text(json.dumps(payload, indent=2))


class RunnerFailed(RuntimeError):
    """The profiled callable raised; partial timing data is attached."""

    def __init__(self, cause: BaseException, partial: LatencyReport | None):
        super().__init__(f"profiled runner failed: {cause!r}")
        self.cause = cause
        self.partial = partial


def _report_from_times(
    times_ms: list[float], warmup: int, resolution, label: str
) -> LatencyReport:
    mean_ms = max(statistics.fmean(times_ms), TIMER_FLOOR_MS)
    return LatencyReport(
        warmup_frames=warmup,
        measured_frames=len(times_ms),
        per_frame_ms=tuple(times_ms),
        mean_ms=mean_ms,
        median_ms=float(np.median(times_ms)),
        p95_ms=float(np.percentile(times_ms, 95)),
        fps=1000.0 / mean_ms,
        resolution=resolution,
        label=label,
    )


def profile(
    runner: Callable[[], object],
    frames: int = 50,
    warmup: int = 10,
    resolution: tuple[int, int] | None = None,
    label: str = "runner",
) -> LatencyReport:
    """Time a frame-processing callable on the calling thread.

    Warm-up invocations are excluded from every statistic. FPS derives from
    the mean frame time, clamped at the timer resolution floor so a zero-cost
    runner still yields a finite rate.
    """
    if frames < 1:
        raise ValueError("frames must be >= 1")
    times_ms: list[float] = []
    try:
        for _ in range(warmup):
            runner()
        for _ in range(frames):
            start = time.perf_counter()
            runner()
            times_ms.append((time.perf_counter() - start) * 1000.0)
    except Exception as exc:
        partial = (
            _report_from_times(times_ms, warmup, resolution, label) if times_ms else None
        )
        raise RunnerFailed(exc, partial) from exc
    return _report_from_times(times_ms, warmup, resolution, label)


def travel_per_update(speed_mps: float, latency_ms: float) -> float:
    """UAV travel between successive depth estimates, in centimeters."""
    if speed_mps < 0 or latency_ms < 0:
        raise ValueError("speed and latency must be non-negative")
    return speed_mps * (latency_ms / 1000.0) * 100.0


@dataclass(frozen=True)
class DistanceEstimate:
    distance_m: float
    n_valid: int
    spread_m: float  # median absolute deviation over the ROI
    timestamp_s: float = 0.0


MIN_ROI_VALID_PIXELS = 5


def estimate_branch_distance(
    disp: DisparityMap,
    rig: CameraRig,
    roi: tuple[int, int, int, int] | np.ndarray,
    min_valid: int = MIN_ROI_VALID_PIXELS,
    timestamp_s: float = 0.0,
) -> DistanceEstimate | None:
    """Robust branch distance over an ROI: median depth plus MAD spread.

    ``roi`` is either an (x, y, w, h) rectangle or a boolean mask of the map
    shape. Returns None (no measurement) when fewer than ``min_valid`` pixels
    in the ROI carry a valid depth.
    """
    depth = disparity_to_depth(disp, rig)
    if isinstance(roi, np.ndarray):
        if roi.shape != depth.values.shape or roi.dtype != bool:
            raise ValueError(
                f"ROI mask must be boolean of shape {depth.values.shape}, got "
                f"{roi.dtype} {roi.shape}"
            )
        region = roi
        if not region.any():
            raise ValueError("ROI mask selects no pixels")
    else:
        x, y, w, h = roi
        if w <= 0 or h <= 0:
            raise ValueError(f"ROI extent must be positive, got {w}x{h}")
        if x < 0 or y < 0 or x + w > depth.width or y + h > depth.height:
            raise ValueError(
                f"ROI {roi} outside {depth.width}x{depth.height} map"
            )
        region = np.zeros(depth.values.shape, dtype=bool)
        region[y : y + h, x : x + w] = True

    selected = depth.values[region & depth.valid]
    if selected.size < min_valid:
        return None
    median = float(np.median(selected))
    spread = float(np.median(np.abs(selected - median)))
    return DistanceEstimate(
        distance_m=median, n_valid=int(selected.size), spread_m=spread,
        timestamp_s=timestamp_s,
    )


@dataclass
class FilterState:
    """Rolling window of the last k distance estimates for one tracked branch."""

    k: int = 5
    window: deque = field(default_factory=deque)

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("window size must be >= 1")
        self.window = deque(self.window, maxlen=self.k)


def temporal_filter(state: FilterState, est: DistanceEstimate) -> tuple[FilterState, float]:
    """Push one estimate and return the rolling median distance."""
    state.window.append(est.distance_m)
    return state, float(np.median(list(state.window)))


class Decision(Enum):
    APPROACH = "approach"
    HOLD = "hold"
    ACTUATE = "actuate"


ACTUATION_ZONE_M = 0.5
SPREAD_CONFIDENCE_M = 0.05


def approach_decision(
    distance_m: float | None,
    spread_m: float = 0.0,
    zone_m: float = ACTUATION_ZONE_M,
    spread_max_m: float = SPREAD_CONFIDENCE_M,
) -> Decision:
    """Approach/hold/actuate from a filtered branch distance.

    Actuation requires being inside the safe zone with a confident (low
    spread) estimate; an in-zone but noisy estimate, or no measurement at
    all, holds position.
    """
    if distance_m is None:
        return Decision.HOLD
    if distance_m < zone_m:
        return Decision.ACTUATE if spread_m <= spread_max_m else Decision.HOLD
    return Decision.APPROACH


class Usability(Enum):
    USABLE = "usable"
    ACCURATE_BUT_SLOW = "accurate_but_slow"
    UNSAFE = "unsafe"

    @property
    def symbol(self) -> str:
        return {"usable": "✓", "accurate_but_slow": "△", "unsafe": "×"}[self.value]


@dataclass(frozen=True)
class DeployThresholds:
    min_fps_usable: float = 3.0
    max_mae_usable_cm: float = 70.0
    max_mae_accurate_cm: float = 30.0
    min_fps_accurate: float = 1.5
    # reliability gate, applied only when a delta1 figure is supplied: an
    # accuracy profile where too few pixels land near the true depth is not
    # deployable even if fps and MAE clear their thresholds
    min_delta1_usable_pct: float = 85.0


def classify_deployability(
    fps: float,
    depth_mae_cm: float,
    delta1_pct: float | None = None,
    thresholds: DeployThresholds = DeployThresholds(),
) -> Usability:
    """Deployability of an (fps, accuracy) operating point.

    Monotone in fps and MAE for a fixed reliability figure: higher error or
    lower frame rate never improves the label.
    """
    t = thresholds
    reliable = delta1_pct is None or delta1_pct >= t.min_delta1_usable_pct
    if fps >= t.min_fps_usable and depth_mae_cm <= t.max_mae_usable_cm and reliable:
        return Usability.USABLE
    if t.min_fps_accurate <= fps and depth_mae_cm <= t.max_mae_accurate_cm:
        return Usability.ACCURATE_BUT_SLOW
    return Usability.UNSAFE
