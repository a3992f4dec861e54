import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from brgm import corruption, generators, losses, perceptual  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def small_problem():
    """Tiny linear generator + downsampling, values in [-2, 2], for gradient checks."""
    r = np.random.default_rng(11)
    gen = generators.LinearGenerator(r.uniform(-1, 1, (8, 8)), r.uniform(-0.5, 0.5, (3, 64, 4)))
    op = corruption.Downsample(corruption.make_kernel("gaussian", 3, 0.8), 2)
    prior = generators.LatentPriorParams(r.uniform(-0.5, 0.5, 4), r.uniform(0.7, 1.3, 4))
    net = perceptual.PerceptualNet(seed=3, resolution=32)
    target = r.uniform(-1, 1, (4, 4))
    hp = losses.HyperParams(lambda_c=0.3, lambda_pixel=0.7, lambda_percept=0.2)
    return dict(gen=gen, op=op, prior=prior, net=net, target=target, hp=hp)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
