"""Seeded synthetic image corpora lying in a low-rank affine subspace."""

from __future__ import annotations

import numpy as np


def cosine_basis(shape: tuple[int, int], rank: int) -> np.ndarray:
    """First ``rank`` separable 2-D cosine patterns ordered by frequency, unit RMS."""
    h, w = shape
    freqs = sorted(((u, v) for u in range(h) for v in range(w) if (u, v) != (0, 0)),
                   key=lambda uv: (uv[0] ** 2 + uv[1] ** 2, uv))
    y = (np.arange(h) + 0.5) / h
    x = (np.arange(w) + 0.5) / w
    out = []
    for u, v in freqs[:rank]:
        pattern = np.outer(np.cos(np.pi * u * y), np.cos(np.pi * v * x))
        out.append(pattern / np.sqrt(np.mean(pattern ** 2)))
    return np.stack(out)


def subspace_corpus(n: int, shape: tuple[int, int] = (32, 32), rank: int = 16,
                    seed: int = 0, amplitude: float = 18.0, level: float = 128.0) -> np.ndarray:
    """``n`` images ``level + sum_k c_k basis_k`` with coefficients ``~ N(0, amplitude^2 / k)``.

    Amplitudes decay with frequency so images look smooth and stay mostly
    inside [0, 255]; values are not clipped, preserving exact rank.
    """
    rng = np.random.default_rng(seed)
    basis = cosine_basis(shape, rank)
    scale = amplitude / np.sqrt(np.arange(1, rank + 1))
    coeffs = rng.standard_normal((n, rank)) * scale
    return level + np.einsum("nk,khw->nhw", coeffs, basis)


def block_mask(shape: tuple[int, int], fraction: float = 0.25) -> np.ndarray:
    """Ones everywhere except a centred square hole of about ``fraction`` of the area."""
    h, w = shape
    side_h = int(round(h * np.sqrt(fraction)))
    side_w = int(round(w * np.sqrt(fraction)))
    m = np.ones(shape)
    top, left = (h - side_h) // 2, (w - side_w) // 2
    m[top:top + side_h, left:left + side_w] = 0.0
    return m
