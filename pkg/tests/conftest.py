from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np
from scipy import ndimage

from branchstereo.dataset import write_exr_depth
from branchstereo.geometry import CameraRig, DepthMap

VIEW_TOKENS = ("up45", "down45", "horizontal")


def textured_pair(height: int, width: int, disparity: int, seed: int = 0):
    """Smooth random texture with a known uniform integer disparity."""
    rng = np.random.default_rng(seed)
    margin = 32
    base = ndimage.gaussian_filter(
        rng.random((height, width + margin + disparity)).astype(np.float32), 1.5
    )
    base = (255 * (base - base.min()) / (np.ptp(base) + 1e-9)).astype(np.float32)
    left = base[:, margin : margin + width]
    right = base[:, margin + disparity : margin + disparity + width]
    return left, right


def touch_mock_corpus(root: Path, trees: int, frames: int = 16) -> int:
    """Empty-file corpus for accounting tests; returns the record count."""
    n = 0
    for tree in range(1, trees + 1):
        tree_dir = root / f"tree_{tree:03d}"
        tree_dir.mkdir(parents=True, exist_ok=True)
        for view in VIEW_TOKENS:
            for frame in range(1, frames + 1):
                stem = f"{tree:03d}_{view}_{frame:02d}"
                (tree_dir / f"left_{stem}.png").touch()
                (tree_dir / f"right_{stem}.png").touch()
                (tree_dir / f"depth_{stem}.exr").touch()
                n += 1
    return n


def build_real_corpus(
    root: Path,
    trees: int = 1,
    frames: int = 2,
    size: tuple[int, int] = (96, 128),
    disparity: int = 16,
    rig: CameraRig | None = None,
) -> int:
    """Small renderable corpus: textured stereo PNGs plus constant-depth EXR."""
    rig = rig or CameraRig()
    depth_m = rig.focal_baseline / disparity
    height, width = size
    n = 0
    for tree in range(1, trees + 1):
        tree_dir = root / f"tree_{tree:03d}"
        tree_dir.mkdir(parents=True, exist_ok=True)
        for view in VIEW_TOKENS:
            for frame in range(1, frames + 1):
                stem = f"{tree:03d}_{view}_{frame:02d}"
                left, right = textured_pair(height, width, disparity, seed=n)
                cv2.imwrite(str(tree_dir / f"left_{stem}.png"), left.astype(np.uint8))
                cv2.imwrite(str(tree_dir / f"right_{stem}.png"), right.astype(np.uint8))
                depth = DepthMap(values=np.full(size, depth_m, np.float32))
                write_exr_depth(tree_dir / f"depth_{stem}.exr", depth)
                n += 1
    return n
