"""Differentiable generators mapping a latent stack ``w`` (L x d) to an image.

Two kinds are provided:

* :class:`LinearGenerator` -- ``G(w) = b + sum_l A_l w_l``.  Fitted to a
  corpus by PCA with :func:`fit_linear_generator`.
* :class:`StyleConvGenerator` -- a small style-modulated conv stack: a
  learned constant feature map, one 3x3 conv per level whose output is
  scaled/shifted channelwise by an affine map of ``w_l``, nearest x2
  upsampling between levels, leaky-ReLU(0.2) and a 1x1 projection.

Images with one channel are returned as (H, W); otherwise (C, H, W).
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import (
    BadMagic,
    DegenerateSampler,
    InsufficientImages,
    ShapeMismatch,
    TruncatedFile,
    VersionUnsupported,
)

MAGIC = b"BRGM"
FORMAT_VERSION = 1
SIGMA_FLOOR = 1e-8


@dataclass(frozen=True)
class LatentPriorParams:
    """Per-dimension Gaussian prior on every latent layer."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64).reshape(-1)
        sigma = np.asarray(self.sigma, dtype=np.float64).reshape(-1)
        if mu.shape != sigma.shape:
            raise ShapeMismatch("mu and sigma must have the same length")
        if np.any(sigma <= 0):
            raise DegenerateSampler("prior sigma must be positive")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim(self) -> int:
        return self.mu.size

    def mean_stack(self, layers: int) -> np.ndarray:
        return np.tile(self.mu, (layers, 1))


class Generator:
    """Common surface of all generators."""

    layers: int
    dim: int
    output_shape: tuple[int, ...]

    def __call__(self, w) -> Tensor:
        return generate(self, w)

    def _forward(self, w: Tensor) -> Tensor:
        raise NotImplementedError

    def named_tensors(self) -> list[tuple[str, np.ndarray]]:
        raise NotImplementedError

    def sample_latents(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Default latent source: standard normal stacks, shape (n, L, d)."""
        return rng.standard_normal((n, self.layers, self.dim))


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


class LinearGenerator(Generator):
    def __init__(self, bias, weights):
        bias = _frozen(bias)
        weights = _frozen(weights)
        if weights.ndim != 3 or weights.shape[1] != bias.size:
            raise ShapeMismatch("weights must be (L, pixels, d) with pixels == bias.size")
        self.bias = bias
        self.weights = weights
        self.layers, _, self.dim = weights.shape
        self.output_shape = bias.shape
        # (pixels, L*d) so that G(w) = b + A_cat @ vec(w)
        self._stacked = _frozen(np.concatenate(list(weights), axis=1))

    @property
    def stacked_weights(self) -> np.ndarray:
        return self._stacked

    def _forward(self, w: Tensor) -> Tensor:
        flat = ad.matmul(self._stacked, ad.reshape(w, (-1,)))
        return ad.reshape(ad.add(flat, self.bias.reshape(-1)), self.output_shape)

    def named_tensors(self):
        return [("bias", self.bias), ("weights", self.weights)]

    def project(self, image) -> np.ndarray:
        """Least-squares latent stack (identical layers) reproducing ``image``."""
        x = np.asarray(image.data if isinstance(image, Tensor) else image, dtype=np.float64)
        if x.shape != self.output_shape:
            raise ShapeMismatch(f"image {x.shape} vs generator output {self.output_shape}")
        a = self.weights.sum(axis=0)
        z, *_ = np.linalg.lstsq(a, (x - self.bias).reshape(-1), rcond=None)
        return np.tile(z, (self.layers, 1))


class StyleConvGenerator(Generator):
    def __init__(self, tensors: dict[str, np.ndarray]):
        self.tensors = {k: _frozen(v) for k, v in tensors.items()}
        self.const = self.tensors["const"]
        self.layers = sum(1 for k in self.tensors if k.startswith("conv"))
        self.dim = self.tensors["style_scale0"].shape[1]
        self.channels = self.const.shape[0]
        out_c = self.tensors["to_image"].shape[0]
        res = self.const.shape[1] * 2 ** (self.layers - 1)
        self.output_shape = (res, res) if out_c == 1 else (out_c, res, res)

    @classmethod
    def random(cls, seed: int = 0, layers: int = 4, dim: int = 8, channels: int = 16,
               out_channels: int = 1, resolution: int = 64) -> "StyleConvGenerator":
        base = resolution // 2 ** (layers - 1)
        if base * 2 ** (layers - 1) != resolution or base < 1:
            raise ShapeMismatch("resolution must be divisible by 2**(layers-1)")
        rng = np.random.default_rng(seed)
        t = {"const": rng.standard_normal((channels, base, base))}
        for lvl in range(layers):
            t[f"conv{lvl}"] = rng.standard_normal((channels, channels, 3, 3)) / np.sqrt(9 * channels)
            t[f"style_scale{lvl}"] = 0.3 * rng.standard_normal((channels, dim)) / np.sqrt(dim)
            t[f"style_shift{lvl}"] = 0.3 * rng.standard_normal((channels, dim)) / np.sqrt(dim)
        t["to_image"] = rng.standard_normal((out_channels, channels, 1, 1)) / np.sqrt(channels)
        return cls(t)

    def _forward(self, w: Tensor) -> Tensor:
        c = self.channels
        x: Tensor = ad.as_tensor(self.const)
        for lvl in range(self.layers):
            if lvl > 0:
                x = ad.upsample_nearest(x, 2)
            x = ad.conv2d(ad.pad(x, [(0, 0), (1, 1), (1, 1)], "zero"), self.tensors[f"conv{lvl}"])
            wl = w[lvl]
            scale = ad.add(ad.matmul(self.tensors[f"style_scale{lvl}"], wl), 1.0)
            shift = ad.matmul(self.tensors[f"style_shift{lvl}"], wl)
            shape = x.shape
            x = ad.add(ad.mul(x, ad.broadcast_to(ad.reshape(scale, (c, 1, 1)), shape)),
                       ad.broadcast_to(ad.reshape(shift, (c, 1, 1)), shape))
            x = ad.leaky_relu(x, 0.2)
        img = ad.conv2d(x, self.tensors["to_image"])
        return ad.reshape(img, self.output_shape)

    def named_tensors(self):
        return list(self.tensors.items())


def generate(gen: Generator, w) -> Tensor:
    """Clean image ``G(w)``; differentiable with respect to ``w``."""
    w = ad.as_tensor(w)
    if w.shape != (gen.layers, gen.dim):
        raise ShapeMismatch(f"latent stack {w.shape} vs generator ({gen.layers}, {gen.dim})")
    return gen._forward(w)


def estimate_latent_prior(sampler: Callable[[int], np.ndarray], n: int) -> LatentPriorParams:
    """Mean and unbiased std per latent dimension over ``n`` draws.

    ``sampler(n)`` returns an (n, d) or (n, L, d) array; stacks are pooled
    across layers.
    """
    if n < 2:
        raise DegenerateSampler("need at least two draws")
    draws = np.asarray(sampler(n), dtype=np.float64)
    if draws.shape[0] != n:
        raise ShapeMismatch(f"sampler returned {draws.shape[0]} draws, expected {n}")
    draws = draws.reshape(-1, draws.shape[-1])
    mu = draws.mean(axis=0)
    sigma = draws.std(axis=0, ddof=1)
    if np.any(sigma < SIGMA_FLOOR):
        raise DegenerateSampler("sampler has a constant latent dimension")
    return LatentPriorParams(mu, sigma)


def generator_sampler(gen: Generator, rng: np.random.Generator) -> Callable[[int], np.ndarray]:
    return lambda n: gen.sample_latents(rng, n)


def fit_linear_generator(images: Sequence, d: int, layers: int = 1) -> LinearGenerator:
    """PCA generator: bias is the mean image, ``A`` the top-``d`` scaled components.

    ``A = U_d S_d / sqrt(n - 1)`` so that latents of corpus images have unit
    variance per component; each layer holds ``A / layers`` so identical
    layers reproduce ``A z``.
    """
    arrays = [np.asarray(im.data if isinstance(im, Tensor) else im, dtype=np.float64) for im in images]
    if len(arrays) < d or len(arrays) < 2:
        raise InsufficientImages(f"{len(arrays)} images cannot support latent dim {d}")
    shape = arrays[0].shape
    if any(a.shape != shape for a in arrays):
        raise ShapeMismatch("all images must share one shape")
    x = np.stack([a.reshape(-1) for a in arrays])
    bias = x.mean(axis=0)
    u, s, _ = np.linalg.svd((x - bias).T, full_matrices=False)
    if u.shape[1] < d:
        raise InsufficientImages(f"corpus rank bound {u.shape[1]} below latent dim {d}")
    a = u[:, :d] * (s[:d] / np.sqrt(len(arrays) - 1))
    return LinearGenerator(bias.reshape(shape), np.stack([a / layers] * layers))


# ------------------------------------------------------------ weight files


def save_tensors(tensors: Sequence[tuple[str, np.ndarray]]) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", FORMAT_VERSION, len(tensors)))
    for name, arr in tensors:
        raw = name.encode("utf-8")
        arr = np.asarray(arr, dtype="<f8")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr).tobytes())
    return buf.getvalue()


def load_tensors(blob: bytes) -> list[tuple[str, np.ndarray]]:
    view = memoryview(blob)
    pos = 0

    def read(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(view):
            raise TruncatedFile(f"need {n} bytes at offset {pos}, file has {len(view)}")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    if len(view) < 4 or bytes(view[:4]) != MAGIC:
        raise BadMagic("not a BRGM weight file")
    pos = 4
    version, count = struct.unpack("<II", read(8))
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"weight file version {version}")
    out = []
    for _ in range(count):
        (nlen,) = struct.unpack("<H", read(2))
        name = bytes(read(nlen)).decode("utf-8")
        (rank,) = struct.unpack("<B", read(1))
        shape = struct.unpack(f"<{rank}I", read(4 * rank))
        n = int(np.prod(shape)) if rank else 1
        arr = np.frombuffer(read(8 * n), dtype="<f8").reshape(shape).astype(np.float64)
        out.append((name, arr))
    if pos != len(view):
        raise TruncatedFile(f"{len(view) - pos} trailing bytes after last tensor")
    return out


def save_weights(gen: Generator) -> bytes:
    return save_tensors(gen.named_tensors())


def load_weights(blob: bytes) -> Generator:
    """Rebuild a generator; its kind is inferred from the tensor names."""
    tensors = dict(load_tensors(blob))
    if "const" in tensors:
        return StyleConvGenerator(tensors)
    if {"bias", "weights"} <= tensors.keys():
        return LinearGenerator(tensors["bias"], tensors["weights"])
    raise BadMagic("weight file holds no recognised generator tensors")


def save_prior(prior: LatentPriorParams) -> bytes:
    return save_tensors([("mu", prior.mu), ("sigma", prior.sigma)])


def load_prior(blob: bytes) -> LatentPriorParams:
    t = dict(load_tensors(blob))
    if {"mu", "sigma"} - t.keys():
        raise BadMagic("file holds no latent prior")
    return LatentPriorParams(t["mu"], t["sigma"])
