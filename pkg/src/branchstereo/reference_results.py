"""Published benchmark figures for the five evaluated model variants.

These are externally reported results shipped as read-only fixtures so that
locally computed reports can be laid out side by side with them. They are
labeled "reported" in every output and are never recomputed here.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ReportedResult:
    variant: str
    display_name: str
    epe_px: float
    disp_rmse_px: float
    d1_all_pct: float
    bad_1_0_pct: float
    delta1_pct: float
    delta2_pct: float
    delta3_pct: float
    depth_mae_cm: float
    depth_rmse_cm: float
    depth_abs_rel: float
    pytorch_ms: float
    tensorrt_ms: float
    fps: float
    usable_label: str  # published usability marker


REPORTED_RESULTS: dict[str, ReportedResult] = {
    "vits": ReportedResult(
        "vits", "DEFOM-Stereo ViT-S",
        1.744, 5.824, 5.81, 13.29, 95.90, 98.15, 99.00, 23.40, 157.83, 0.041,
        1210, 450, 2.2, "△",
    ),
    "vitl": ReportedResult(
        "vitl", "DEFOM-Stereo ViT-L",
        1.630, 5.371, 6.36, 16.15, 95.75, 98.11, 98.98, 26.94, 170.70, 0.046,
        3350, 1180, 0.8, "×",
    ),
    "pruneplus": ReportedResult(
        "pruneplus", "DEFOM-PrunePlus",
        5.874, 12.796, 20.12, 41.15, 87.59, 93.76, 96.49, 64.26, 283.78, 0.146,
        800, 300, 3.3, "✓",
    ),
    "prunestereo": ReportedResult(
        "prunestereo", "DEFOM-PruneStereo",
        12.322, 23.753, 23.76, 37.93, 82.71, 90.03, 93.93, 57.63, 279.98, 0.207,
        380, 145, 6.9, "×",
    ),
    "prunenano": ReportedResult(
        "prunenano", "DEFOM-PruneNano",
        13.056, 24.226, 40.12, 59.49, 68.96, 83.53, 90.45, 112.16, 414.36, 0.379,
        240, 118, 8.5, "×",
    ),
}
