"""Frozen random convolutional feature extractor used as the perceptual embedding.

Three bias-free 5x5 stride-2 convolutions (8, 16, 32 channels) with
leaky-ReLU(0.2).  Inputs are bilinearly resized to a fixed resolution
first.  Without biases the map is positively homogeneous of degree one.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import BadImage, BadParameter

CHANNELS = (8, 16, 32)
KERNEL = 5
STRIDE = 2


def resize_matrix(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) linear interpolation matrix, half-pixel centres, edge clamped."""
    if n_in == n_out:
        return np.eye(n_in)
    pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_in - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = pos - lo
    m = np.zeros((n_out, n_in))
    np.add.at(m, (np.arange(n_out), lo), 1.0 - frac)
    np.add.at(m, (np.arange(n_out), hi), frac)
    return m


def resize_bilinear(image, size: tuple[int, int]) -> Tensor:
    """Differentiable bilinear resize of an (H, W) or (C, H, W) image."""
    image = ad.as_tensor(image)
    h, w = image.shape[-2:]
    ry, rx = resize_matrix(h, size[0]), resize_matrix(w, size[1])
    if image.ndim == 2:
        return ad.matmul(ad.matmul(ry, image), rx.T)
    return ad.stack([ad.matmul(ad.matmul(ry, image[c]), rx.T) for c in range(image.shape[0])])


class PerceptualNet:
    def __init__(self, seed: int = 0, in_channels: int = 1, resolution: int = 64):
        rng = np.random.default_rng(seed)
        self.seed = seed
        self.in_channels = in_channels
        self.resolution = resolution
        weights = []
        cin = in_channels
        for cout in CHANNELS:
            fan_in = cin * KERNEL * KERNEL
            w = rng.standard_normal((cout, cin, KERNEL, KERNEL)) / np.sqrt(fan_in)
            w.setflags(write=False)
            weights.append(w)
            cin = cout
        self.weights = tuple(weights)
        if self.embedding_shape[-1] < 1:
            raise BadParameter(f"resolution {resolution} too small for the conv stack")

    @property
    def embedding_shape(self) -> tuple[int, int, int]:
        n = self.resolution
        for _ in CHANNELS:
            n = (n - KERNEL) // STRIDE + 1
        return (CHANNELS[-1], n, n)

    def embed(self, image) -> Tensor:
        return embed(self, image)


def embed(net: PerceptualNet, image) -> Tensor:
    image = ad.as_tensor(image)
    if image.ndim == 2:
        if net.in_channels != 1:
            raise BadImage(f"net expects {net.in_channels} channels, got a grayscale image")
        chans = 1
    elif image.ndim == 3:
        chans = image.shape[0]
        if chans != net.in_channels:
            raise BadImage(f"net expects {net.in_channels} channels, got {chans}")
    else:
        raise BadImage(f"cannot embed a tensor of shape {image.shape}")
    x = resize_bilinear(image, (net.resolution, net.resolution))
    if image.ndim == 2:
        x = ad.reshape(x, (1, net.resolution, net.resolution))
    for w in net.weights:
        x = ad.leaky_relu(ad.conv2d(x, w, stride=STRIDE), 0.2)
    return x
