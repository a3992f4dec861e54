"""
Forward corruption models
=========================

The two known degradations: kernel downsampling with reflect padding and a
binary mask.  Results are written as PGM files under ``demo_output/``.
"""

from pathlib import Path

import numpy as np

from brgm import corruption, datasets, imageio

out = Path("demo_output")
out.mkdir(exist_ok=True)

image = datasets.subspace_corpus(1, (32, 32), 16, seed=2, amplitude=12.0)[0]
imageio.save_image(image, out / "clean.pgm")

###############################################################################
# A 4x box downsample keeps ceil(32 / 4) samples along each axis.

box = corruption.Downsample(corruption.make_kernel("box", 4), 4)
low = corruption.apply(box, image)
print("box x4:", image.shape, "->", low.shape)
imageio.save_image(low, out / "box4.pgm")

###############################################################################
# A Gaussian kernel with odd size is padded symmetrically.

gauss = corruption.Downsample(corruption.parse_kernel("gauss:5:1.2"), 2)
print("gauss:5:1.2 stride 2 ->", corruption.apply(gauss, image).shape)

###############################################################################
# Kernels are normalized, so a flat image stays flat.

flat = corruption.apply(gauss, np.full((32, 32), 90.0)).data
print("flat image after blur: min", flat.min(), "max", flat.max())

###############################################################################
# A mask zeroes a central block covering a quarter of the area.

mask = corruption.Mask(datasets.block_mask((32, 32), 0.25))
holes = corruption.apply(mask, image)
print("observed fraction", mask.observed_fraction)
imageio.save_image(holes, out / "holes.pgm")
