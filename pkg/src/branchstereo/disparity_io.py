"""Disparity file formats and colormap rendering.

Two interchange formats for externally produced predictions:

* PFM: float32, bottom-up row order, little- or big-endian per the scale
  sign. Lossless round trip.
* 16-bit PNG: disparity * 256 stored as uint16, value 0 meaning invalid
  (the common stereo benchmark convention). Quantized to 1/256 px.
"""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

from .geometry import DisparityMap

PNG16_SCALE = 256.0


class DisparityFileError(ValueError):
    """Malformed disparity file."""


def write_pfm(path: str | Path, disp: DisparityMap) -> None:
    """Write as grayscale PFM; invalid pixels are stored as 0."""
    values = np.where(disp.valid, disp.values, 0.0).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{disp.width} {disp.height}\n".encode())
        fh.write(b"-1.0\n")  # negative scale = little-endian
        fh.write(values[::-1].tobytes())  # PFM rows run bottom-up


def read_pfm(path: str | Path) -> DisparityMap:
    with open(path, "rb") as fh:
        header = fh.readline().strip()
        if header not in (b"Pf", b"PF"):
            raise DisparityFileError(f"{path}: not a PFM file (header {header!r})")
        if header == b"PF":
            raise DisparityFileError(f"{path}: color PFM not supported for disparity")
        dims = fh.readline().split()
        if len(dims) != 2:
            raise DisparityFileError(f"{path}: malformed PFM dimension line")
        width, height = int(dims[0]), int(dims[1])
        scale = float(fh.readline())
        if scale == 0:
            raise DisparityFileError(f"{path}: PFM scale must be nonzero")
        dtype = "<f4" if scale < 0 else ">f4"
        payload = fh.read(width * height * 4)
        if len(payload) != width * height * 4:
            raise DisparityFileError(f"{path}: truncated PFM payload")
        data = np.frombuffer(payload, dtype=dtype)
    values = data.reshape(height, width)[::-1].astype(np.float32)
    if abs(scale) != 1.0:
        values = values * abs(scale)
    valid = values > 0
    return DisparityMap(values=np.where(valid, values, 0.0), valid=valid)


def write_png16(path: str | Path, disp: DisparityMap) -> None:
    """Quantize to 1/256 px in a 16-bit PNG; invalid pixels encode as 0."""
    quantized = np.rint(disp.values * PNG16_SCALE)
    quantized = np.clip(quantized, 0, np.iinfo(np.uint16).max).astype(np.uint16)
    # a valid pixel must never collide with the invalid sentinel
    quantized = np.where(disp.valid, np.maximum(quantized, 1), 0)
    if not cv2.imwrite(str(path), quantized.astype(np.uint16)):
        raise IOError(f"could not write {path}")


def read_png16(path: str | Path) -> DisparityMap:
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise DisparityFileError(f"{path}: unreadable PNG")
    if raw.dtype != np.uint16 or raw.ndim != 2:
        raise DisparityFileError(
            f"{path}: expected single-channel 16-bit PNG, got {raw.dtype} ndim={raw.ndim}"
        )
    valid = raw > 0
    values = (raw.astype(np.float32) / PNG16_SCALE)
    return DisparityMap(values=np.where(valid, values, 0.0), valid=valid)


FORMATS = ("pfm", "png16")


def write_disparity_file(disp: DisparityMap, path: str | Path, fmt: str = "pfm") -> None:
    if fmt == "pfm":
        write_pfm(path, disp)
    elif fmt == "png16":
        write_png16(path, disp)
    else:
        raise ValueError(f"unknown disparity format {fmt!r} (expected one of {FORMATS})")


def read_disparity_file(path: str | Path, fmt: str | None = None) -> DisparityMap:
    if fmt is None:
        fmt = "png16" if str(path).lower().endswith(".png") else "pfm"
    if fmt == "pfm":
        return read_pfm(path)
    if fmt == "png16":
        return read_png16(path)
    raise ValueError(f"unknown disparity format {fmt!r} (expected one of {FORMATS})")


def render_colormap(
    disp: DisparityMap, value_range: tuple[float, float] | None = None
) -> np.ndarray:
    """Perceptually ordered RGB rendering; invalid pixels are black."""
    if value_range is None:
        if disp.valid.any():
            lo = float(disp.values[disp.valid].min())
            hi = float(disp.values[disp.valid].max())
        else:
            lo, hi = 0.0, 1.0
    else:
        lo, hi = value_range
    span = hi - lo if hi > lo else 1.0
    norm = np.clip((disp.values - lo) / span, 0.0, 1.0)
    indexed = np.rint(norm * 255).astype(np.uint8)
    bgr = cv2.applyColorMap(indexed, cv2.COLORMAP_TURBO)
    rgb = bgr[:, :, ::-1].copy()
    rgb[~disp.valid] = 0
    return rgb


def assemble_grid(images: list[list[np.ndarray]], pad: int = 2) -> np.ndarray:
    """Stack RGB tiles row-major into one comparison image (white padding)."""
    if not images or not images[0]:
        raise ValueError("grid needs at least one tile")
    tile_h = max(img.shape[0] for row in images for img in row)
    tile_w = max(img.shape[1] for row in images for img in row)
    n_cols = max(len(row) for row in images)
    grid = np.full(
        (len(images) * (tile_h + pad) - pad, n_cols * (tile_w + pad) - pad, 3),
        255,
        dtype=np.uint8,
    )
    for i, row in enumerate(images):
        for j, img in enumerate(row):
            y = i * (tile_h + pad)
            x = j * (tile_w + pad)
            grid[y : y + img.shape[0], x : x + img.shape[1]] = img
    return grid
