"""
Metrics and the command line
============================

Score restorations and drive the same pipeline through ``brgm``.
"""

import subprocess
import sys
from pathlib import Path

import numpy as np

from brgm import datasets, imageio, metrics

ref = datasets.subspace_corpus(1, (32, 32), 16, seed=4, amplitude=12.0)[0]
noisy = ref + np.random.default_rng(0).normal(0, 25.5, ref.shape)

print("psnr of an image with itself", metrics.psnr(ref, ref))
print("rmse / mae with sigma 25.5 noise", metrics.rmse(ref, noisy), metrics.mae(ref, noisy))
print("ssim", metrics.ssim(ref, noisy))

###############################################################################
# The CLI reads and writes binary PGM.  Each command also writes its
# resolved options to ``<command>.cfg`` next to the output.

out = Path("demo_output")
out.mkdir(exist_ok=True)
imageio.save_image(ref, out / "ref.pgm")


def brgm(*args):
    cmd = [sys.executable, "-m", "brgm.cli", *map(str, args)]
    done = subprocess.run(cmd, capture_output=True, text=True)
    print("$ brgm", " ".join(map(str, args)), "->", done.returncode)
    return done.stdout


brgm("corrupt", "--input", out / "ref.pgm", "--factor", "2", "--out", out / "ref_low.pgm")
print((out / "corrupt.cfg").read_text())
print(brgm("evaluate", "--ref", out / "ref.pgm", "--test", out / "ref.pgm"))
