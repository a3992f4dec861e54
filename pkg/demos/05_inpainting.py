"""
MAP in-painting
===============

Fill a square hole with the generator.  Observed pixels should be kept
almost exactly while the hole is filled from the learned subspace.
"""

import numpy as np

from brgm import corruption, datasets, generators, losses, metrics, optim

corpus = datasets.subspace_corpus(65, (32, 32), 16, seed=7)
gen = generators.fit_linear_generator(list(corpus[:64]), d=16, layers=2)
prior = generators.estimate_latent_prior(
    generators.generator_sampler(gen, np.random.default_rng(0)), 10_000)
clean = corpus[64]

mask = datasets.block_mask((32, 32), 0.25)
op = corruption.Mask(mask)
observed = corruption.apply(op, clean).data

###############################################################################
# Without the perceptual term this runs in a few seconds.

hp = losses.HyperParams(lambda_pixel=1.0, lambda_percept=0.0)
result = optim.reconstruct_map(observed, gen, op, None, prior, hp)

seen, hole = mask == 1, mask == 0
print("observed-pixel rmse", metrics.rmse(result.clean.data[seen], clean[seen]))
print("hole rmse          ", metrics.rmse(result.clean.data[hole], clean[hole]))
print("hole rmse if filled with the corpus mean",
      metrics.rmse(gen.bias[hole], clean[hole]))
