"""
Posterior samples by variational inference
==========================================

Fit a diagonal Gaussian over the latent stack and draw restorations.  On a
conjugate model the fitted mean and spread are compared with the exact
posterior.
"""

import numpy as np

from brgm import corruption, generators, losses, variational

###############################################################################
# One layer, diagonal decoder, identity observation: the posterior is
# Gaussian per coordinate with precision ``1/sigma^2 + a^2``.

rng = np.random.default_rng(3)
d = 6
a = rng.uniform(8, 16, d)
gen = generators.LinearGenerator(rng.uniform(-1, 1, (2, 3)), np.diag(a)[None])
op = corruption.Mask(np.ones((2, 3)))
prior = generators.LatentPriorParams(rng.uniform(0.5, 1.5, d), rng.uniform(0.8, 1.2, d))
target = gen(rng.uniform(0.8, 2, (1, d))).data + rng.normal(0, 0.5, (2, 3))

prec = 1 / prior.sigma ** 2 + a ** 2
exact_mean = (prior.mu / prior.sigma ** 2 + a * (target.ravel() - gen.bias.ravel())) / prec
exact_sd = 1 / np.sqrt(prec)

hp = losses.HyperParams(lambda_c=0, lambda_percept=0, lambda_pixel=1.0, use_sigma_prior=False)
theta = variational.fit_variational(target, gen, op, None, prior, hp)
print("mean rel err", np.max(np.abs(theta.mu[0] - exact_mean) / np.abs(exact_mean)))
print("std  rel err", np.max(np.abs(theta.sigma[0] - exact_sd) / exact_sd))

###############################################################################
# The inverse-gamma prior on the spread pushes it upward.

wide = variational.fit_variational(target, gen, op, None, prior, hp.replace(use_sigma_prior=True))
print("mean sigma without / with prior", theta.sigma.mean(), wide.sigma.mean())

###############################################################################
# Restorations: the mean image first, then samples.

images = variational.sample_reconstructions(wide, gen, 5, seed=0)
spread = np.std(np.stack([im.data for im in images[1:]]), axis=0)
print("per-pixel spread of 5 samples", np.round(spread, 3))
