"""Stereo-perception evaluation and deployment-analysis toolkit for UAV
branch pruning: disparity/depth geometry, corpus handling, metric suites,
a classical baseline matcher, architecture cost modeling, and the
deployment-side distance/decision pipeline."""

from .geometry import CameraRig, DepthMap, DisparityMap, depth_to_disparity, disparity_to_depth

__all__ = [
    "CameraRig",
    "DepthMap",
    "DisparityMap",
    "disparity_to_depth",
    "depth_to_disparity",
]

__version__ = "0.1.0"
