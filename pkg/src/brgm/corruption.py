"""Known forward corruption models: kernel downsampling and binary masking."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import BadImage, BadParameter, EmptyOutput, ShapeMismatch


@dataclass(frozen=True, eq=False)
class Downsample:
    """Reflect-pad, correlate with a normalized kernel, keep every ``stride``-th sample."""

    kernel: np.ndarray
    stride: int = 1

    def __post_init__(self):
        k = np.array(self.kernel, dtype=np.float64)
        if k.ndim != 2 or k.size == 0:
            raise BadParameter("kernel must be a non-empty 2-D array")
        if np.any(k < 0) or not np.all(np.isfinite(k)) or k.sum() <= 0:
            raise BadParameter("kernel entries must be finite, non-negative, not all zero")
        if int(self.stride) != self.stride or self.stride < 1:
            raise BadParameter("stride must be a positive integer")
        k = k / k.sum()
        k.setflags(write=False)
        object.__setattr__(self, "kernel", k)
        object.__setattr__(self, "stride", int(self.stride))


@dataclass(frozen=True, eq=False)
class Mask:
    """Hadamard product with a {0, 1} mask of the clean image's spatial shape."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.array(self.mask, dtype=np.float64)
        if m.ndim != 2:
            raise BadParameter("mask must be 2-D")
        if not np.all((m == 0) | (m == 1)):
            raise BadParameter("mask entries must be exactly 0 or 1")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @property
    def observed_fraction(self) -> float:
        return float(self.mask.mean())


CorruptionOp = Downsample | Mask


def same_padding(extent: int, k: int, s: int) -> tuple[int, int]:
    """(before, after) padding giving ``ceil(extent / s)`` output samples."""
    total = max(0, (math.ceil(extent / s) - 1) * s + k - extent)
    return total // 2, total - total // 2


def output_shape(op: CorruptionOp, shape: tuple[int, ...]) -> tuple[int, ...]:
    if isinstance(op, Mask):
        return tuple(shape)
    s = op.stride
    return tuple(shape[:-2]) + tuple(math.ceil(n / s) for n in shape[-2:])


def apply(op: CorruptionOp, image) -> Tensor:
    """Corrupt an (H, W) or (C, H, W) image; channels are handled independently."""
    image = ad.as_tensor(image)
    if image.ndim not in (2, 3):
        raise ShapeMismatch(f"image must be (H, W) or (C, H, W), got {image.shape}")
    h, w = image.shape[-2:]
    if isinstance(op, Mask):
        if op.mask.shape != (h, w):
            raise ShapeMismatch(f"mask {op.mask.shape} vs image {(h, w)}")
        m = op.mask if image.ndim == 2 else np.broadcast_to(op.mask, image.shape)
        return ad.mul(image, m)
    if not isinstance(op, Downsample):
        raise BadParameter(f"unknown corruption op {op!r}")
    kh, kw = op.kernel.shape
    if kh > h or kw > w:
        raise EmptyOutput(f"kernel {kh}x{kw} larger than image {h}x{w}")
    s = op.stride
    chans = 1 if image.ndim == 2 else image.shape[0]
    x = ad.reshape(image, (chans, 1, h, w))
    x = ad.pad(x, [(0, 0), (0, 0), same_padding(h, kh, s), same_padding(w, kw, s)], "reflect")
    y = ad.conv2d(x, op.kernel[None, None], stride=s)
    ho, wo = y.shape[-2:]
    if ho < 1 or wo < 1:
        raise EmptyOutput("downsampling produced an empty image")
    return ad.reshape(y, (ho, wo) if image.ndim == 2 else (chans, ho, wo))


def make_kernel(kind: str, size: int, sigma: float | None = None) -> np.ndarray:
    """Normalized ``box`` or ``gaussian`` kernel of ``size`` x ``size`` taps."""
    if int(size) != size or size < 1:
        raise BadParameter("kernel size must be a positive integer")
    size = int(size)
    if kind == "box":
        return np.full((size, size), 1.0 / (size * size))
    if kind in ("gaussian", "gauss"):
        if sigma is None or not sigma > 0:
            raise BadParameter("gaussian kernel needs sigma > 0")
        r = np.arange(size) - (size - 1) / 2.0
        k = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2.0 * sigma ** 2))
        return k / k.sum()
    raise BadParameter(f"unknown kernel kind {kind!r}")


def parse_kernel(text: str) -> np.ndarray:
    """Parse ``box:<size>`` or ``gauss:<size>:<sigma>``."""
    parts = text.split(":")
    try:
        if parts[0] == "box" and len(parts) == 2:
            return make_kernel("box", int(parts[1]))
        if parts[0] in ("gauss", "gaussian") and len(parts) == 3:
            return make_kernel("gaussian", int(parts[1]), float(parts[2]))
    except ValueError as exc:
        raise BadParameter(f"bad kernel spec {text!r}") from exc
    raise BadParameter(f"bad kernel spec {text!r}; use box:N or gauss:N:SIGMA")


def mask_from_image(image) -> Mask:
    """Threshold a grayscale image (path or 0-255 array) at half intensity."""
    if isinstance(image, (str, bytes)) or hasattr(image, "__fspath__"):
        from .imageio import load_image

        image = load_image(image)
    arr = np.asarray(image.data if isinstance(image, Tensor) else image, dtype=np.float64)
    if arr.ndim != 2:
        raise BadImage("mask image must be grayscale")
    return Mask((arr / 255.0 >= 0.5).astype(np.float64))
