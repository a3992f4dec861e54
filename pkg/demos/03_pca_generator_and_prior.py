"""
A linear generator from PCA
===========================

Fit a PCA generator on a synthetic corpus, estimate the latent prior from
generator samples and store both in the binary weight format.
"""

from pathlib import Path

import numpy as np

from brgm import datasets, generators

corpus = datasets.subspace_corpus(65, (32, 32), 16, seed=7)
train, held_out = corpus[:64], corpus[64]

###############################################################################
# Two layers share the principal directions; each holds ``A / 2`` so equal
# layer latents reproduce a one-layer projection.

gen = generators.fit_linear_generator(list(train), d=16, layers=2)
print("latent stack shape", (gen.layers, gen.dim), "output", gen.output_shape)

stack = gen.project(held_out)
err = np.sqrt(np.mean((gen(stack).data - held_out) ** 2))
print("held-out projection rmse", err)

###############################################################################
# Prior mean and standard deviation per latent dimension from 10,000 draws.

sampler = generators.generator_sampler(gen, np.random.default_rng(0))
prior = generators.estimate_latent_prior(sampler, 10_000)
print("prior mu range", prior.mu.min(), prior.mu.max())
print("prior sigma range", prior.sigma.min(), prior.sigma.max())

###############################################################################
# Weight files round-trip bit for bit.

out = Path("demo_output")
out.mkdir(exist_ok=True)
blob = generators.save_weights(gen)
(out / "pca.brgm").write_bytes(blob)
print("weights", len(blob), "bytes; identical after reload:",
      generators.save_weights(generators.load_weights(blob)) == blob)

###############################################################################
# A small random style-modulated conv generator is also available.

conv = generators.StyleConvGenerator.random(seed=0, resolution=32)
print("style conv output", conv(conv.sample_latents(np.random.default_rng(1), 1)[0]).shape)
