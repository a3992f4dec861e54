"""
MAP super-resolution
====================

Restore a 32x32 image from its 8x8 box-downsampled version by optimizing
the latent stack of a PCA generator.  Bicubic upsampling is the baseline.
"""

from pathlib import Path

import numpy as np
from scipy.ndimage import zoom

from brgm import corruption, datasets, generators, imageio, losses, metrics, optim, perceptual

corpus = datasets.subspace_corpus(65, (32, 32), 16, seed=7)
gen = generators.fit_linear_generator(list(corpus[:64]), d=16, layers=2)
prior = generators.estimate_latent_prior(
    generators.generator_sampler(gen, np.random.default_rng(0)), 10_000)
clean = corpus[64]

op = corruption.Downsample(corruption.make_kernel("box", 4), 4)
low = corruption.apply(op, clean).data

###############################################################################
# Pixel precision 1.0 suits the 0-255 scale; the other weights are defaults.

hp = losses.HyperParams(lambda_pixel=1.0)
net = perceptual.PerceptualNet(0)
result = optim.reconstruct_map(low, gen, op, net, prior, hp)

losses_ = result.losses
print("loss  first", losses_[0], " last", losses_[-1])
print("corrupted-space rmse", metrics.rmse(low, result.corrupted))

###############################################################################
# Compare against bicubic upsampling in both spaces.

bicubic = zoom(low, 4, order=3)
for name, img in (("map", result.clean.data), ("bicubic", bicubic)):
    rep = metrics.MetricReport.compare(clean, img)
    print(f"{name:8s} rmse {rep.rmse:6.2f}  psnr {rep.psnr:5.2f}  ssim {rep.ssim:.3f}")

out = Path("demo_output")
out.mkdir(exist_ok=True)
imageio.save_image(result.clean, out / "sr_map.pgm")
imageio.save_image(bicubic, out / "sr_bicubic.pgm")
