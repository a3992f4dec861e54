"""Seeded problem instances shared by the oracle, optimizer and acceptance tests."""

import numpy as np

from brgm import corruption, datasets, generators, losses, perceptual


def map_oracle_problem():
    """Two-layer linear generator under 2x box downsampling; pixel and prior terms only."""
    rng = np.random.default_rng(1)
    gen = generators.LinearGenerator(rng.uniform(0, 4, (8, 8)), rng.standard_normal((2, 64, 3)) * 2.0)
    op = corruption.Downsample(corruption.make_kernel("box", 2), 2)
    prior = generators.LatentPriorParams(rng.normal(0, 0.3, 3), rng.uniform(0.7, 1.3, 3))
    w0 = rng.standard_normal((2, 3))
    target = corruption.apply(op, gen(w0)).data + rng.normal(0, 0.5, (4, 4))
    hp = losses.HyperParams(lambda_c=0.0, lambda_pixel=0.05, lambda_percept=0.0, steps=5000)
    return dict(target=target, gen=gen, op=op, net=None, prior=prior, hp=hp)


def conjugate_problem(use_sigma_prior=False):
    """Diagonal linear-Gaussian model with a closed-form posterior.

    Returns the problem plus the analytic posterior mean and std.
    """
    rng = np.random.default_rng(3)
    h, w, d = 2, 3, 6
    a = rng.uniform(8, 16, d)
    gen = generators.LinearGenerator(rng.uniform(-1, 1, (h, w)), np.diag(a)[None])
    op = corruption.Mask(np.ones((h, w)))
    prior = generators.LatentPriorParams(rng.uniform(0.5, 1.5, d), rng.uniform(0.8, 1.2, d))
    target = gen(rng.uniform(0.8, 2, (1, d))).data + rng.normal(0, 0.5, (h, w))
    hp = losses.HyperParams(lambda_c=0.0, lambda_percept=0.0, lambda_pixel=1.0, steps=5000,
                            lr=0.001, use_sigma_prior=use_sigma_prior)
    # Per coordinate: prior precision 1/sigma^2, likelihood precision a^2 (lambda_pixel = 1).
    prec = 1 / prior.sigma ** 2 + a ** 2
    mean = (prior.mu / prior.sigma ** 2 + a * (target.reshape(-1) - gen.bias.reshape(-1))) / prec
    problem = dict(target=target, gen=gen, op=op, net=None, prior=prior, hp=hp)
    return problem, mean, 1 / np.sqrt(prec)


def end_to_end_problem(kind):
    """PCA generator fitted on 64 corpus images; a held-out image observed at x4 or through a mask."""
    corpus = datasets.subspace_corpus(65, (32, 32), 16, seed=7)
    gen = generators.fit_linear_generator(list(corpus[:64]), d=16, layers=2)
    clean = corpus[64]
    if kind == "downsample":
        op = corruption.Downsample(corruption.make_kernel("box", 4), 4)
    else:
        op = corruption.Mask(datasets.block_mask((32, 32), 0.25))
    prior = generators.estimate_latent_prior(
        generators.generator_sampler(gen, np.random.default_rng(0)), 10_000)
    net = perceptual.PerceptualNet(0)
    target = corruption.apply(op, clean).data
    hp = losses.HyperParams(lambda_pixel=1.0)
    return dict(target=target, gen=gen, op=op, net=net, prior=prior, hp=hp), clean


def moving_average(x, k=100):
    return np.convolve(x, np.ones(k) / k, mode="valid")
