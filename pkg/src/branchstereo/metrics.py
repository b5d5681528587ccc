"""Disparity- and depth-domain evaluation metrics with explicit masking.

All statistics are computed over the joint validity mask of prediction and
ground truth. Split-level aggregation is the arithmetic mean of per-image
metrics, recorded as such in the report metadata.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .dataset import SampleRecord, gt_disparity
from .geometry import CameraRig, DepthMap, DisparityMap, disparity_to_depth

# KITTI outlier rule: error above BOTH an absolute and a relative threshold.
D1_ABS_PX = 3.0
D1_REL = 0.05
BAD_THRESHOLD_PX = 1.0
DELTA_BASE = 1.25


@dataclass(frozen=True)
class DisparityMetrics:
    epe_px: float
    rmse_px: float
    d1_all_pct: float
    bad_1_0_pct: float
    valid_pixels: int


@dataclass(frozen=True)
class DepthMetrics:
    delta1_pct: float
    delta2_pct: float
    delta3_pct: float
    mae_cm: float
    rmse_cm: float
    abs_rel: float


def _joint_mask(pred_valid: np.ndarray, gt_valid: np.ndarray, what: str) -> np.ndarray:
    if pred_valid.shape != gt_valid.shape:
        raise ValueError(
            f"{what}: prediction shape {pred_valid.shape} != ground truth {gt_valid.shape}"
        )
    mask = pred_valid & gt_valid
    if not mask.any():
        raise ValueError(f"{what}: joint validity mask is empty")
    return mask


def disparity_metrics(pred: DisparityMap, gt: DisparityMap) -> DisparityMetrics:
    mask = _joint_mask(pred.valid, gt.valid, "disparity_metrics")
    p = pred.values[mask].astype(np.float64)
    g = gt.values[mask].astype(np.float64)
    err = np.abs(p - g)
    d1 = (err > D1_ABS_PX) & (err > D1_REL * g)
    return DisparityMetrics(
        epe_px=float(err.mean()),
        rmse_px=float(np.sqrt(np.mean(err**2))),
        d1_all_pct=float(100.0 * d1.mean()),
        bad_1_0_pct=float(100.0 * (err > BAD_THRESHOLD_PX).mean()),
        valid_pixels=int(mask.sum()),
    )


def depth_metrics(pred: DepthMap, gt: DepthMap) -> DepthMetrics:
    mask = _joint_mask(pred.valid, gt.valid, "depth_metrics")
    p = pred.values[mask].astype(np.float64)
    g = gt.values[mask].astype(np.float64)
    if (p <= 0).any() or (g <= 0).any():
        raise ValueError("depth_metrics: non-positive depth marked valid")
    ratio = np.maximum(p / g, g / p)
    err_cm = 100.0 * np.abs(p - g)
    # strict '<' keeps boundary cases (ratio exactly 1.25^k) out of delta_k
    return DepthMetrics(
        delta1_pct=float(100.0 * (ratio < DELTA_BASE).mean()),
        delta2_pct=float(100.0 * (ratio < DELTA_BASE**2).mean()),
        delta3_pct=float(100.0 * (ratio < DELTA_BASE**3).mean()),
        mae_cm=float(err_cm.mean()),
        rmse_cm=float(np.sqrt(np.mean(err_cm**2))),
        abs_rel=float(np.mean(np.abs(p - g) / g)),
    )


# column order mirrors the benchmark table layout
METRIC_COLUMNS = (
    "epe_px",
    "disp_rmse_px",
    "d1_all_pct",
    "bad_1_0_pct",
    "delta1_pct",
    "delta2_pct",
    "delta3_pct",
    "depth_mae_cm",
    "depth_rmse_cm",
    "depth_abs_rel",
)


@dataclass(frozen=True)
class ImageMetrics:
    record_id: str
    disparity: DisparityMetrics
    depth: DepthMetrics

    def row(self) -> dict[str, float]:
        return {
            "epe_px": self.disparity.epe_px,
            "disp_rmse_px": self.disparity.rmse_px,
            "d1_all_pct": self.disparity.d1_all_pct,
            "bad_1_0_pct": self.disparity.bad_1_0_pct,
            "delta1_pct": self.depth.delta1_pct,
            "delta2_pct": self.depth.delta2_pct,
            "delta3_pct": self.depth.delta3_pct,
            "depth_mae_cm": self.depth.mae_cm,
            "depth_rmse_cm": self.depth.rmse_cm,
            "depth_abs_rel": self.depth.abs_rel,
        }


@dataclass(frozen=True)
class MetricReport:
    model_name: str
    per_image: tuple[ImageMetrics, ...]
    missing: tuple[str, ...] = ()
    aggregation: str = "mean_of_images"

    @property
    def complete(self) -> bool:
        return not self.missing

    def summary(self) -> dict[str, float]:
        rows = [im.row() for im in self.per_image]
        return {col: float(np.mean([r[col] for r in rows])) for col in METRIC_COLUMNS}

    def to_json(self, path: str | Path) -> None:
        payload = {
            "model": self.model_name,
            "aggregation": self.aggregation,
            "complete": self.complete,
            "missing": list(self.missing),
            "summary": self.summary(),
            "per_image": [
                {"record": im.record_id, **asdict(im.disparity), **asdict(im.depth)}
                for im in self.per_image
            ],
        }
        Path(path).write_text(json.dumps(payload, indent=2))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("model", "record") + METRIC_COLUMNS)
            for im in sorted(self.per_image, key=lambda im: im.record_id):
                row = im.row()
                writer.writerow(
                    [self.model_name, im.record_id] + [f"{row[c]:.6g}" for c in METRIC_COLUMNS]
                )
            summ = self.summary()
            writer.writerow(
                [self.model_name, "summary"] + [f"{summ[c]:.6g}" for c in METRIC_COLUMNS]
            )


PredictionSource = Callable[[SampleRecord], "DisparityMap | None"]


def evaluate_split(
    pred_source: PredictionSource,
    split: Sequence[SampleRecord],
    rig: CameraRig,
    model_name: str = "prediction",
) -> MetricReport:
    """Score a prediction source against EXR ground truth over a split.

    A missing prediction is reported per record and evaluation continues;
    the report flags incompleteness instead of raising.
    """
    per_image: list[ImageMetrics] = []
    missing: list[str] = []
    for record in sorted(split, key=lambda r: r.record_id):
        pred = pred_source(record)
        if pred is None:
            missing.append(record.record_id)
            continue
        gt = gt_disparity(record, rig)
        disp_m = disparity_metrics(pred, gt)
        depth_m = depth_metrics(disparity_to_depth(pred, rig), disparity_to_depth(gt, rig))
        per_image.append(ImageMetrics(record.record_id, disp_m, depth_m))
    return MetricReport(
        model_name=model_name, per_image=tuple(per_image), missing=tuple(missing)
    )
