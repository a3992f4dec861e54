"""Diagonal-Gaussian variational posterior over the latent stack.

``q(w | theta) = N(mu_v, diag(softplus(rho_v)^2))`` is fitted by Adam
descent on the Monte Carlo objective::

    -log p(sigma_v) + sum_i [log q(w_i) - log p(w_i) - log p(I | w_i)]

with ``w_i = mu_v + softplus(rho_v) * eps_i``.  ``log p(w) + log p(I | w)``
is taken as minus one half of the MAP loss (constants dropped).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from . import autodiff as ad
from . import generators, losses, optim
from .autodiff import Tensor
from .config import rng_stream
from .errors import DivergedLoss, NonFiniteValue, NonPositiveArgument, ShapeMismatch

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class VariationalParams:
    mu: np.ndarray
    rho: np.ndarray
    trace: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.mu = np.array(self.mu, dtype=np.float64)
        self.rho = np.array(self.rho, dtype=np.float64)
        if self.mu.shape != self.rho.shape:
            raise ShapeMismatch(f"mu_v {self.mu.shape} vs rho_v {self.rho.shape}")

    @property
    def sigma(self) -> np.ndarray:
        return softplus(self.rho)


def softplus(rho):
    """``log(1 + exp(rho))``; exact identity above 30.  Tensors stay on the tape."""
    if isinstance(rho, Tensor):
        return ad.softplus(rho)
    rho = np.asarray(rho, dtype=np.float64)
    return np.where(rho > 30.0, rho, np.log1p(np.exp(np.minimum(rho, 30.0))))


def sample_q(mu, rho, eps) -> Tensor:
    mu, rho, eps = ad.as_tensor(mu), ad.as_tensor(rho), ad.as_tensor(eps)
    if not (mu.shape == rho.shape == eps.shape):
        raise ShapeMismatch(f"mu {mu.shape}, rho {rho.shape}, eps {eps.shape}")
    return ad.add(mu, ad.mul(ad.softplus(rho), eps))


def log_q(w, mu, rho) -> Tensor:
    w, mu, rho = ad.as_tensor(w), ad.as_tensor(mu), ad.as_tensor(rho)
    if not (w.shape == mu.shape == rho.shape):
        raise ShapeMismatch(f"w {w.shape}, mu {mu.shape}, rho {rho.shape}")
    sigma = ad.softplus(rho)
    z = ad.div(ad.sub(w, mu), sigma)
    per = ad.add(ad.log(sigma), ad.mul(0.5, ad.square(z)))
    return ad.sub(-HALF_LOG_2PI * w.size, ad.tsum(per))


def inverse_gamma_logpdf(x, alpha: float, beta: float):
    """Log density ``a log b - lgamma(a) - (a + 1) log x - b / x`` (shape ``a``, scale ``b``).

    NumPy input returns an array (``-inf`` where ``x`` underflows the ratio,
    never NaN); a Tensor input returns the tracked sum over all entries.
    """
    head = alpha * math.log(beta) - gammaln(alpha)
    if isinstance(x, Tensor):
        if np.any(x.data <= 0):
            raise NonPositiveArgument("inverse-gamma argument must be positive")
        per = ad.add(ad.mul(alpha + 1.0, ad.log(x)), ad.div(beta, x))
        return ad.sub(head * x.size, ad.tsum(per))
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise NonPositiveArgument("inverse-gamma argument must be positive")
    with np.errstate(over="ignore"):
        return head - (alpha + 1.0) * np.log(x) - beta / x


def elbo_objective(mu, rho, target, gen, op, net, prior, hp: losses.HyperParams,
                   eps: Sequence) -> Tensor:
    """Monte Carlo objective summed (not averaged) over the supplied noise draws."""
    mu, rho = ad.as_tensor(mu), ad.as_tensor(rho)
    if len(eps) < 1:
        raise ShapeMismatch("at least one noise draw is required")
    total = None
    for e in eps:
        w = sample_q(mu, rho, e)
        term = ad.add(log_q(w, mu, rho),
                      ad.mul(0.5, losses.total_map_loss(w, target, gen, op, net, prior, hp)))
        total = term if total is None else ad.add(total, term)
    if hp.use_sigma_prior:
        total = ad.sub(total, inverse_gamma_logpdf(ad.softplus(rho), hp.alpha, hp.beta))
    return total


def fit_variational(target, gen, op, net, prior, hp: losses.HyperParams) -> VariationalParams:
    """Warm-start ``mu_v`` with a short MAP run, set ``rho_v = hp.rho_init``, then descend.

    Fresh noise is drawn every step from the ``"mc"`` stream of ``hp.seed``.
    """
    target = ad.constant(target)
    warm = optim.reconstruct_map(target, gen, op, net, prior, hp, steps=hp.warmup_steps)
    mu = warm.w_star
    rho = np.full_like(mu, hp.rho_init)
    rng = rng_stream(hp.seed, "mc")
    state = optim.AdamState.zeros_like(np.stack([mu, rho]))
    trace = []
    for step in range(hp.steps):
        eps = [rng.standard_normal(mu.shape) for _ in range(hp.n_mc)]
        try:
            with ad.Tape() as tape:
                m, r = tape.watch(mu), tape.watch(rho)
                loss = elbo_objective(m, r, target, gen, op, net, prior, hp, eps)
            gm, gr = tape.gradient(loss, [m, r])
        except NonFiniteValue as exc:
            raise DivergedLoss(f"non-finite variational objective at step {step}") from exc
        trace.append(loss.item())
        theta, state = optim.adam_step(np.stack([mu, rho]), np.stack([gm.data, gr.data]), state,
                                       hp.lr, hp.beta1, hp.beta2, hp.eps)
        mu, rho = theta[0], theta[1]
    return VariationalParams(mu, rho, trace)


def sample_reconstructions(theta: VariationalParams, gen, n: int, seed: int = 0,
                           eps: Sequence | None = None) -> list[Tensor]:
    """Mean image ``G(mu_v)`` followed by ``n`` images ``G(mu_v + sigma_v * eps_i)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if eps is None:
        rng = rng_stream(seed, "sampler")
        eps = [rng.standard_normal(theta.mu.shape) for _ in range(n)]
    elif len(eps) != n:
        raise ShapeMismatch(f"{len(eps)} noise draws supplied for n={n}")
    images = [generators.generate(gen, theta.mu)]
    for e in eps:
        images.append(generators.generate(gen, sample_q(theta.mu, theta.rho, e)))
    return images
