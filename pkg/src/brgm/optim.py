"""Adam minimization of the MAP objective over the latent stack."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import corruption, generators, losses
from .autodiff import Tensor
from .errors import DivergedLoss, NonFiniteGradient, NonFiniteValue, ShapeMismatch

TRACE_COLUMNS = ("step", "loss", "l_w", "l_colin", "l_pixel", "l_percept")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, w) -> "AdamState":
        w = np.asarray(w, dtype=np.float64)
        return cls(np.zeros_like(w), np.zeros_like(w), 0)


def adam_step(w, grad, state: AdamState, lr: float = 0.001, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; returns new parameters and a new state."""
    w = np.asarray(w, dtype=np.float64)
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != w.shape or state.m.shape != w.shape:
        raise ShapeMismatch(f"adam: parameter {w.shape}, gradient {g.shape}, state {state.m.shape}")
    if not np.all(np.isfinite(g)):
        raise NonFiniteGradient("gradient contains NaN or Inf")
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    return w - lr * m_hat / (np.sqrt(v_hat) + eps), AdamState(m, v, t)


@dataclass
class ReconstructionResult:
    w_star: np.ndarray
    clean: Tensor
    corrupted: Tensor
    trace: list[tuple[float, ...]] = field(default_factory=list)

    @property
    def losses(self) -> np.ndarray:
        return np.array([row[1] for row in self.trace])


def reconstruct_map(target, gen, op, net, prior, hp: losses.HyperParams,
                    init: np.ndarray | None = None, objective: str = "map",
                    steps: int | None = None) -> ReconstructionResult:
    """Run ``hp.steps`` Adam iterations from the prior-mean stack (or ``init``).

    ``objective="nlp"`` minimizes the explicit negative log-posterior
    instead of the weighted loss; both share their minimizer.  The trace
    holds one row per step, evaluated at the iterate before its update.
    """
    target = ad.constant(target)
    out_shape = corruption.output_shape(op, gen.output_shape)
    if target.shape != out_shape:
        raise ShapeMismatch(f"observed image {target.shape} vs corrupted output {out_shape}")
    if objective not in ("map", "nlp"):
        raise ValueError(f"unknown objective {objective!r}")
    n_steps = hp.steps if steps is None else steps
    w = prior.mean_stack(gen.layers) if init is None else np.array(init, dtype=np.float64)
    if w.shape != (gen.layers, gen.dim):
        raise ShapeMismatch(f"initial stack {w.shape} vs ({gen.layers}, {gen.dim})")
    state = AdamState.zeros_like(w)
    trace = []
    for step in range(n_steps):
        try:
            with ad.Tape() as tape:
                leaf = tape.watch(w)
                if objective == "map":
                    terms = losses.map_loss_terms(leaf, target, gen, op, net, prior, hp)
                    loss = losses.combine_terms(terms, hp)
                else:
                    terms = None
                    loss = losses.neg_log_posterior(leaf, target, gen, op, net, prior, hp)
            (g,) = tape.gradient(loss, [leaf])
        except NonFiniteValue as exc:
            raise DivergedLoss(f"non-finite loss at step {step}") from exc
        value = loss.item()
        if terms is None:
            trace.append((step, value, math.nan, math.nan, math.nan, math.nan))
        else:
            trace.append((step, value) + tuple(terms[k].item() for k in TRACE_COLUMNS[2:]))
        w, state = adam_step(w, g.data, state, hp.lr, hp.beta1, hp.beta2, hp.eps)
    clean = generators.generate(gen, w)
    return ReconstructionResult(w, clean, corruption.apply(op, clean), trace)
