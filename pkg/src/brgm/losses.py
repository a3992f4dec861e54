"""MAP objective over the latent stack and its explicit log-density form.

The total loss is::

    L_w + lambda_c * L_colin + lambda_pixel * L_pixel + lambda_percept * L_percept

with ``L_colin = sum_{i<j} (1 - cos(w_i, w_j))``.  This equals ``-2 kappa
sum_{i<j} cos`` up to the constant ``2 kappa C(L, 2)`` when
``lambda_c = 2 kappa``, so gradients agree with the von Mises
log-density while the loss stays non-negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np
from scipy.special import i0e

from . import autodiff as ad
from . import corruption, generators, perceptual
from .autodiff import Tensor
from .errors import BadParameter, ShapeMismatch, ZeroNormLatent
from .generators import LatentPriorParams


@dataclass(frozen=True)
class HyperParams:
    lambda_c: float = 0.03
    lambda_pixel: float = 1e-5
    lambda_percept: float = 0.01
    lr: float = 0.001
    steps: int = 5000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    n_mc: int = 3
    alpha: float = 0.1
    beta: float = 0.95
    use_sigma_prior: bool = True
    seed: int = 0
    warmup_steps: int = 500
    rho_init: float = -4.0

    def __post_init__(self):
        for name in ("lambda_c", "lambda_pixel", "lambda_percept"):
            if not getattr(self, name) >= 0:
                raise BadParameter(f"{name} must be >= 0")
        if not self.lr > 0:
            raise BadParameter("lr must be > 0")
        if self.steps < 0 or self.warmup_steps < 0:
            raise BadParameter("step counts must be >= 0")
        if self.n_mc < 1:
            raise BadParameter("n_mc must be >= 1")
        if not (self.alpha > 0 and self.beta > 0):
            raise BadParameter("inverse-gamma alpha and beta must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise BadParameter("invalid Adam settings")

    @property
    def kappa(self) -> float:
        return self.lambda_c / 2.0

    def replace(self, **changes) -> "HyperParams":
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def prior_loss(w, prior: LatentPriorParams) -> Tensor:
    w = ad.as_tensor(w)
    if w.ndim != 2 or w.shape[1] != prior.dim:
        raise ShapeMismatch(f"latent stack {w.shape} vs prior dim {prior.dim}")
    mu = np.broadcast_to(prior.mu, w.shape)
    sigma = np.broadcast_to(prior.sigma, w.shape)
    return ad.sum_squares(ad.div(ad.sub(w, mu), sigma))


def _pairwise_cos(w: Tensor) -> list[Tensor]:
    norms = np.linalg.norm(w.data, axis=1)
    if np.any(norms == 0):
        raise ZeroNormLatent(f"latent layer(s) {np.flatnonzero(norms == 0).tolist()} have zero norm")
    n = w.shape[0]
    i, j = np.triu_indices(n, k=1)
    if i.size == 0:
        return []
    return [ad.tsum(ad.cosine_similarity(ad.take(w, i, 0), ad.take(w, j, 0)))]


def colinear_loss(w) -> Tensor:
    """Sum over unordered layer pairs of ``1 - cos``; lies in [0, 2 C(L, 2)]."""
    w = ad.as_tensor(w)
    n = w.shape[0]
    pairs = n * (n - 1) // 2
    cos_sum = _pairwise_cos(w)
    if not cos_sum:
        return ad.mul(ad.tsum(w), 0.0)
    return ad.sub(float(pairs), cos_sum[0])


def pixel_loss(target, corrupted) -> Tensor:
    target, corrupted = ad.as_tensor(target), ad.as_tensor(corrupted)
    if target.shape != corrupted.shape:
        raise ShapeMismatch(f"pixel loss: {target.shape} vs {corrupted.shape}")
    return ad.sum_squares(ad.sub(target, corrupted))


def percept_loss(target, corrupted, net: perceptual.PerceptualNet) -> Tensor:
    target, corrupted = ad.as_tensor(target), ad.as_tensor(corrupted)
    if target.shape != corrupted.shape:
        raise ShapeMismatch(f"perceptual loss: {target.shape} vs {corrupted.shape}")
    return ad.sum_squares(ad.sub(perceptual.embed(net, target), perceptual.embed(net, corrupted)))


def map_loss_terms(w, target, gen, op, net, prior, hp: HyperParams) -> dict[str, Tensor]:
    """Unweighted loss components; a term is computed only when its weight is non-zero."""
    w = ad.as_tensor(w)
    target = ad.as_tensor(target)
    terms = {"l_w": prior_loss(w, prior)}
    zero = ad.mul(terms["l_w"], 0.0)
    terms["l_colin"] = colinear_loss(w) if hp.lambda_c > 0 else zero
    if hp.lambda_pixel > 0 or hp.lambda_percept > 0:
        cor = corruption.apply(op, generators.generate(gen, w))
        if cor.shape != target.shape:
            raise ShapeMismatch(f"observed image {target.shape} vs corrupted output {cor.shape}")
    terms["l_pixel"] = pixel_loss(target, cor) if hp.lambda_pixel > 0 else zero
    terms["l_percept"] = percept_loss(target, cor, net) if hp.lambda_percept > 0 else zero
    return terms


def combine_terms(terms: dict[str, Tensor], hp: HyperParams) -> Tensor:
    total = terms["l_w"]
    for key, lam in (("l_colin", hp.lambda_c), ("l_pixel", hp.lambda_pixel),
                     ("l_percept", hp.lambda_percept)):
        if lam > 0:
            total = ad.add(total, ad.mul(lam, terms[key]))
    return total


def total_map_loss(w, target, gen, op, net, prior, hp: HyperParams) -> Tensor:
    return combine_terms(map_loss_terms(w, target, gen, op, net, prior, hp), hp)


def _log_i0(x: float) -> float:
    return math.log(i0e(x)) + x


def neg_log_posterior(w, target, gen, op, net, prior, hp: HyperParams,
                      include_constants: bool = True) -> Tensor:
    """``-2 [log p(w) + log p(I | w)]`` from the explicit densities.

    Gaussian prior per latent entry, von Mises on every unordered pair of
    layer angles (``kappa = lambda_c / 2``), Gaussian pixel and embedding
    noise with precisions ``lambda_pixel`` and ``lambda_percept``.  A zero
    precision removes that likelihood factor entirely.  With
    ``include_constants=False`` every normalizer is dropped.
    """
    w = ad.as_tensor(w)
    target = ad.as_tensor(target)
    kappa = hp.kappa
    n_layers = w.shape[0]
    const = 0.0

    total = prior_loss(w, prior)
    const += n_layers * float(np.sum(np.log(2 * math.pi * prior.sigma ** 2)))

    pairs = n_layers * (n_layers - 1) // 2
    if kappa > 0 and pairs:
        total = ad.sub(total, ad.mul(2.0 * kappa, _pairwise_cos(w)[0]))
    if pairs:
        const += 2.0 * pairs * (math.log(2 * math.pi) + _log_i0(kappa))

    if hp.lambda_pixel > 0 or hp.lambda_percept > 0:
        cor = corruption.apply(op, generators.generate(gen, w))
        if cor.shape != target.shape:
            raise ShapeMismatch(f"observed image {target.shape} vs corrupted output {cor.shape}")
    if hp.lambda_pixel > 0:
        total = ad.add(total, ad.mul(hp.lambda_pixel, pixel_loss(target, cor)))
        const += target.size * math.log(2 * math.pi / hp.lambda_pixel)
    if hp.lambda_percept > 0:
        total = ad.add(total, ad.mul(hp.lambda_percept, percept_loss(target, cor, net)))
        n_phi = int(np.prod(net.embedding_shape))
        const += n_phi * math.log(2 * math.pi / hp.lambda_percept)

    return ad.add(total, const) if include_constants else total
