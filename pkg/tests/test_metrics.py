import math

import numpy as np
import pytest

from brgm import metrics as M
from brgm.errors import ImageTooSmall, ShapeMismatch
from brgm.perceptual import PerceptualNet


def test_identical_images(rng):
    a = rng.uniform(0, 255, (16, 16))
    assert M.rmse(a, a) == 0.0 and M.mae(a, a) == 0.0
    assert M.psnr(a, a) == 99.0
    assert M.ssim(a, a) == pytest.approx(1.0, abs=1e-12)


def test_constant_offset(rng):
    a = rng.uniform(0, 200, (9, 9))
    assert M.rmse(a, a + 3) == pytest.approx(3.0, abs=1e-12)
    assert M.mae(a, a + 3) == pytest.approx(3.0, abs=1e-12)


def test_psnr_closed_forms():
    a = np.zeros((10, 10))
    assert M.psnr(a, a + 25.5) == pytest.approx(20.0, abs=1e-12)
    assert M.psnr(a, a + 255.0) == pytest.approx(0.0, abs=1e-12)


def test_against_scalar_oracle(rng):
    a, b = rng.uniform(0, 255, (2, 6, 7))
    diffs = [x - y for x, y in zip(a.ravel(), b.ravel())]
    assert M.rmse(a, b) == pytest.approx(math.sqrt(sum(d * d for d in diffs) / len(diffs)), abs=1e-10)
    assert M.mae(a, b) == pytest.approx(sum(abs(d) for d in diffs) / len(diffs), abs=1e-10)


def test_ssim_constant_black_white():
    c1 = (0.01 * 255) ** 2
    got = M.ssim(np.zeros((8, 8)), np.full((8, 8), 255.0))
    assert got == pytest.approx(c1 / (255.0 ** 2 + c1), rel=1e-12)
    assert 0 < got < 1e-3


def test_ssim_single_window_formula(rng):
    a, b = rng.uniform(0, 255, (2, 8, 8))
    ma, mb = a.mean(), b.mean()
    va, vb = a.var(), b.var()
    cov = np.mean((a - ma) * (b - mb))
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    expect = (2 * ma * mb + c1) * (2 * cov + c2) / ((ma ** 2 + mb ** 2 + c1) * (va + vb + c2))
    assert M.ssim(a, b) == pytest.approx(expect, abs=1e-12)


def test_random_pair_properties(rng):
    for _ in range(100):
        shape = tuple(rng.integers(8, 20, 2))
        a, b = rng.uniform(0, 255, (2,) + shape)
        assert M.rmse(a, b) >= M.mae(a, b)
        assert M.rmse(a, b) == M.rmse(b, a) and M.mae(a, b) == M.mae(b, a)
        assert M.psnr(a, b) == M.psnr(b, a)
        s = M.ssim(a, b)
        assert s == pytest.approx(M.ssim(b, a), abs=1e-15) and -1 <= s <= 1


def test_colour_ssim_averages_channels(rng):
    a, b = rng.uniform(0, 255, (2, 3, 16, 16))
    assert M.ssim(a, b) == pytest.approx(np.mean([M.ssim(a[c], b[c]) for c in range(3)]), abs=1e-14)


def test_errors():
    with pytest.raises(ShapeMismatch):
        M.rmse(np.zeros(3), np.zeros(4))
    with pytest.raises(ImageTooSmall):
        M.ssim(np.zeros((7, 12)), np.zeros((7, 12)))


def test_report(rng):
    a, b = rng.uniform(0, 255, (2, 16, 16))
    rep = M.MetricReport.compare(a, b)
    assert math.isnan(rep.percept) and rep.rmse == M.rmse(a, b)
    rep = M.MetricReport.compare(a, a, net=PerceptualNet(0, resolution=32))
    assert rep.percept == 0.0 and rep.psnr == 99.0
