"""Binary PGM (P5) and PPM (P6) with maxval 255.

Grayscale loads as (H, W); colour loads channel-first as (3, H, W).  Values
are float64 on the 0-255 scale.  Saving clamps to [0, 255] and rounds half
to even, so 8-bit data round-trips bit-exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .errors import BadHeader, TruncatedFile, UnsupportedMaxval


def _tokens(blob: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments."""
    out, pos, n = [], 0, len(blob)
    while len(out) < count:
        while pos < n and blob[pos:pos + 1].isspace():
            pos += 1
        if pos < n and blob[pos:pos + 1] == b"#":
            while pos < n and blob[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not blob[pos:pos + 1].isspace() and blob[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise BadHeader("unexpected end of header")
        out.append(blob[start:pos])
    if pos >= n or not blob[pos:pos + 1].isspace():
        raise BadHeader("header must end with a single whitespace byte")
    return out, pos + 1


def decode(blob: bytes) -> np.ndarray:
    magic, w, h, maxval = [], 0, 0, 0
    try:
        (magic, w, h, maxval), offset = _tokens(blob, 4)
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise BadHeader(f"malformed header: {exc}") from exc
    if magic not in (b"P5", b"P6"):
        raise BadHeader(f"unsupported magic {magic!r}; only binary P5/P6")
    if w <= 0 or h <= 0:
        raise BadHeader(f"bad dimensions {w}x{h}")
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval}; only 255 is supported")
    chans = 1 if magic == b"P5" else 3
    need = w * h * chans
    data = blob[offset:offset + need]
    if len(data) < need:
        raise TruncatedFile(f"expected {need} sample bytes, found {len(data)}")
    arr = np.frombuffer(data, dtype=np.uint8).astype(np.float64)
    if chans == 1:
        return arr.reshape(h, w)
    return arr.reshape(h, w, 3).transpose(2, 0, 1).copy()


def to_uint8(image) -> np.ndarray:
    arr = np.asarray(image.data if isinstance(image, Tensor) else image, dtype=np.float64)
    return np.rint(np.clip(arr, 0.0, 255.0)).astype(np.uint8)


def encode(image) -> bytes:
    arr = to_uint8(image)
    if arr.ndim == 2:
        h, w = arr.shape
        return b"P5\n%d %d\n255\n" % (w, h) + arr.tobytes()
    if arr.ndim == 3 and arr.shape[0] == 3:
        _, h, w = arr.shape
        return b"P6\n%d %d\n255\n" % (w, h) + arr.transpose(1, 2, 0).tobytes()
    raise BadHeader(f"cannot encode image of shape {arr.shape}")


def load_image(path) -> np.ndarray:
    return decode(Path(path).read_bytes())


def save_image(image, path) -> None:
    Path(path).write_bytes(encode(image))


def extension_for(image) -> str:
    shape = np.shape(image.data if isinstance(image, Tensor) else image)
    return ".pgm" if len(shape) == 2 else ".ppm"
