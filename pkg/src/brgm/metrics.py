"""Image quality metrics on the 0-255 intensity scale."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .errors import ImageTooSmall, ShapeMismatch

PSNR_CAP = 99.0
SSIM_WINDOW = 8
K1, K2 = 0.01, 0.03


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a.data if isinstance(a, Tensor) else a, dtype=np.float64)
    b = np.asarray(b.data if isinstance(b, Tensor) else b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"metric operands differ in shape: {a.shape} vs {b.shape}")
    return a, b


def rmse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def mae(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean(np.abs(a - b)))


def psnr(a, b, max_value: float = 255.0) -> float:
    err = rmse(a, b)
    if err < max_value * 10 ** (-PSNR_CAP / 20):
        return PSNR_CAP
    return 20.0 * math.log10(max_value / err)


def ssim(a, b, data_range: float = 255.0) -> float:
    """Mean SSIM over non-overlapping 8x8 windows; colour images average channels.

    Windows use population statistics; a trailing partial window is ignored.
    """
    a, b = _pair(a, b)
    if a.ndim == 2:
        a, b = a[None], b[None]
    if a.ndim != 3:
        raise ShapeMismatch("ssim expects (H, W) or (C, H, W) images")
    h, w = a.shape[-2:]
    n = SSIM_WINDOW
    if h < n or w < n:
        raise ImageTooSmall(f"image {h}x{w} smaller than the {n}x{n} window")
    hh, ww = (h // n) * n, (w // n) * n

    def blocks(x):
        x = x[:, :hh, :ww].reshape(x.shape[0], hh // n, n, ww // n, n)
        return x.transpose(0, 1, 3, 2, 4).reshape(x.shape[0], hh // n, ww // n, n * n)

    xa, xb = blocks(a), blocks(b)
    c1, c2 = (K1 * data_range) ** 2, (K2 * data_range) ** 2
    ma, mb = xa.mean(-1), xb.mean(-1)
    va, vb = xa.var(-1), xb.var(-1)
    cov = ((xa - ma[..., None]) * (xb - mb[..., None])).mean(-1)
    s = ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma ** 2 + mb ** 2 + c1) * (va + vb + c2))
    return float(s.mean())


def perceptual_distance(a, b, net) -> float:
    """Mean squared difference of the fixed random-feature embeddings."""
    from .perceptual import embed

    a, b = _pair(a, b)
    return float(np.mean((embed(net, a).data - embed(net, b).data) ** 2))


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    psnr: float
    ssim: float
    mae: float
    percept: float = float("nan")

    @classmethod
    def compare(cls, ref, test, net=None) -> "MetricReport":
        return cls(rmse(ref, test), psnr(ref, test), ssim(ref, test), mae(ref, test),
                   perceptual_distance(ref, test, net) if net is not None else float("nan"))
