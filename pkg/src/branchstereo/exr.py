"""Minimal single-part scan-line EXR reader/writer.

Supports NONE, ZIP and ZIPS compression with HALF/FLOAT channels, which
covers the depth images exported by common engine pipelines. No binding to
the C++ OpenEXR library is required; writes are lossless so a write/read
round trip of float data is bit-exact.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

MAGIC = 20000630
_VERSION = 2

_COMPRESSION_NONE = 0
_COMPRESSION_RLE = 1
_COMPRESSION_ZIPS = 2
_COMPRESSION_ZIP = 3

_LINES_PER_CHUNK = {_COMPRESSION_NONE: 1, _COMPRESSION_ZIPS: 1, _COMPRESSION_ZIP: 16}

_PIXEL_UINT = 0
_PIXEL_HALF = 1
_PIXEL_FLOAT = 2

_DTYPES = {_PIXEL_HALF: np.dtype("<f2"), _PIXEL_FLOAT: np.dtype("<f4")}


class ExrError(ValueError):
    """Malformed or unsupported EXR file."""


def _read_cstring(buf: bytes, pos: int) -> tuple[str, int]:
    end = buf.index(b"\x00", pos)
    return buf[pos:end].decode("latin-1"), end + 1


def _predictor_decode(data: bytes) -> bytes:
    src = np.frombuffer(data, dtype=np.uint8).astype(np.int64)
    # byte-wise recurrence t[i] = t[i-1] + src[i] - 128 (mod 256), t[0] = src[0]
    t = (np.cumsum(src) - 128 * np.arange(len(src))) % 256
    out = np.empty(len(t), dtype=np.uint8)
    half = (len(t) + 1) // 2
    out[0::2] = t[:half]
    out[1::2] = t[half:]
    return out.tobytes()


def _predictor_encode(data: bytes) -> bytes:
    src = np.frombuffer(data, dtype=np.uint8)
    half = (len(src) + 1) // 2
    t = np.empty(len(src), dtype=np.uint8)
    t[:half] = src[0::2]
    t[half:] = src[1::2]
    d = t.astype(np.int16)
    d[1:] = (d[1:] - d[:-1] + 128) % 256  # first byte is stored verbatim
    return d.astype(np.uint8).tobytes()


def _parse_channels(data: bytes) -> list[tuple[str, int]]:
    channels = []
    pos = 0
    while pos < len(data) and data[pos] != 0:
        name, pos = _read_cstring(data, pos)
        pixel_type, _plinear, x_samp, y_samp = struct.unpack_from("<iB3xii", data, pos)
        pos += 16
        if pixel_type not in _DTYPES:
            raise ExrError(f"unsupported pixel type {pixel_type} for channel {name!r}")
        if x_samp != 1 or y_samp != 1:
            raise ExrError(f"subsampled channel {name!r} not supported")
        channels.append((name, pixel_type))
    return channels


def read_exr(path: str | Path) -> dict[str, np.ndarray]:
    """Read every channel of a scan-line EXR as float32 arrays keyed by name."""
    raw = Path(path).read_bytes()
    if len(raw) < 8 or struct.unpack_from("<i", raw, 0)[0] != MAGIC:
        raise ExrError(f"{path}: not an EXR file")
    version = struct.unpack_from("<i", raw, 4)[0]
    if version & 0x200 or version & 0x1000:
        raise ExrError(f"{path}: tiled or multi-part EXR not supported")

    pos = 8
    channels: list[tuple[str, int]] = []
    compression = None
    data_window = None
    while True:
        name, pos = _read_cstring(raw, pos)
        if not name:
            break
        _attr_type, pos = _read_cstring(raw, pos)
        size = struct.unpack_from("<i", raw, pos)[0]
        pos += 4
        payload = raw[pos : pos + size]
        pos += size
        if name == "channels":
            channels = _parse_channels(payload)
        elif name == "compression":
            compression = payload[0]
        elif name == "dataWindow":
            data_window = struct.unpack("<4i", payload)

    if not channels or compression is None or data_window is None:
        raise ExrError(f"{path}: missing required header attributes")
    if compression not in _LINES_PER_CHUNK:
        raise ExrError(f"{path}: compression {compression} not supported (use none/zip/zips)")

    x_min, y_min, x_max, y_max = data_window
    width = x_max - x_min + 1
    height = y_max - y_min + 1
    lines_per_chunk = _LINES_PER_CHUNK[compression]
    n_chunks = (height + lines_per_chunk - 1) // lines_per_chunk

    offsets = struct.unpack_from(f"<{n_chunks}Q", raw, pos)
    out = {name: np.empty((height, width), dtype=np.float32) for name, _ in channels}
    # channels are stored per scanline in alphabetical order
    ordered = sorted(channels, key=lambda c: c[0])

    for offset in offsets:
        y, size = struct.unpack_from("<ii", raw, offset)
        chunk = raw[offset + 8 : offset + 8 + size]
        n_lines = min(lines_per_chunk, y_max - y + 1)
        expected = n_lines * width * sum(_DTYPES[t].itemsize for _, t in ordered)
        if compression != _COMPRESSION_NONE and size < expected:
            chunk = _predictor_decode(zlib.decompress(chunk))
        if len(chunk) != expected:
            raise ExrError(f"{path}: chunk at y={y} has {len(chunk)} bytes, expected {expected}")
        cpos = 0
        for line in range(n_lines):
            row = y - y_min + line
            for name, pixel_type in ordered:
                nbytes = width * _DTYPES[pixel_type].itemsize
                values = np.frombuffer(chunk, dtype=_DTYPES[pixel_type], count=width, offset=cpos)
                out[name][row] = values.astype(np.float32)
                cpos += nbytes
    return out


def write_exr(
    path: str | Path,
    channels: dict[str, np.ndarray],
    compression: str = "zip",
) -> None:
    """Write float32 channels as a single-part scan-line EXR (lossless)."""
    comp = {"none": _COMPRESSION_NONE, "zip": _COMPRESSION_ZIP, "zips": _COMPRESSION_ZIPS}.get(
        compression
    )
    if comp is None:
        raise ValueError(f"unsupported compression {compression!r}")
    if not channels:
        raise ValueError("no channels to write")
    shapes = {arr.shape for arr in channels.values()}
    if len(shapes) != 1:
        raise ValueError(f"channel shapes differ: {shapes}")
    height, width = shapes.pop()
    ordered = sorted(channels)

    chlist = b""
    for name in ordered:
        chlist += name.encode("latin-1") + b"\x00"
        chlist += struct.pack("<iB3xii", _PIXEL_FLOAT, 0, 1, 1)
    chlist += b"\x00"

    def attr(name: str, attr_type: str, payload: bytes) -> bytes:
        return (
            name.encode() + b"\x00" + attr_type.encode() + b"\x00"
            + struct.pack("<i", len(payload)) + payload
        )

    box = struct.pack("<4i", 0, 0, width - 1, height - 1)
    header = (
        attr("channels", "chlist", chlist)
        + attr("compression", "compression", bytes([comp]))
        + attr("dataWindow", "box2i", box)
        + attr("displayWindow", "box2i", box)
        + attr("lineOrder", "lineOrder", b"\x00")
        + attr("pixelAspectRatio", "float", struct.pack("<f", 1.0))
        + attr("screenWindowCenter", "v2f", struct.pack("<2f", 0.0, 0.0))
        + attr("screenWindowWidth", "float", struct.pack("<f", 1.0))
        + b"\x00"
    )

    lines_per_chunk = _LINES_PER_CHUNK[comp]
    n_chunks = (height + lines_per_chunk - 1) // lines_per_chunk
    planes = {n: np.ascontiguousarray(channels[n], dtype="<f4") for n in ordered}

    chunks = []
    for ci in range(n_chunks):
        y0 = ci * lines_per_chunk
        n_lines = min(lines_per_chunk, height - y0)
        parts = []
        for line in range(n_lines):
            for name in ordered:
                parts.append(planes[name][y0 + line].tobytes())
        data = b"".join(parts)
        if comp != _COMPRESSION_NONE:
            packed = zlib.compress(_predictor_encode(data))
            if len(packed) < len(data):
                data = packed
        chunks.append((y0, data))

    with open(path, "wb") as fh:
        fh.write(struct.pack("<ii", MAGIC, _VERSION))
        fh.write(header)
        table_pos = fh.tell()
        fh.write(b"\x00" * 8 * n_chunks)
        offsets = []
        for y0, data in chunks:
            offsets.append(fh.tell())
            fh.write(struct.pack("<ii", y0, len(data)))
            fh.write(data)
        fh.seek(table_pos)
        fh.write(struct.pack(f"<{n_chunks}Q", *offsets))
