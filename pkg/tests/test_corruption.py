import numpy as np
import pytest

from brgm import autodiff as ad
from brgm import corruption as C
from brgm.errors import BadImage, BadParameter, EmptyOutput, ShapeMismatch
from brgm.imageio import save_image

from _oracles import direct_correlate, gradcheck


def test_box_downsample_worked_example():
    img = np.arange(1.0, 17.0).reshape(4, 4)
    op = C.Downsample(C.make_kernel("box", 2), 2)
    out = C.apply(op, img).data
    np.testing.assert_array_equal(out, [[3.5, 5.5], [11.5, 13.5]])
    np.testing.assert_array_equal(out, direct_correlate(img, op.kernel, 2))


def test_odd_kernel_matches_direct_oracle_on_padded_image(rng):
    img = rng.uniform(0, 255, (9, 7))
    op = C.Downsample(C.make_kernel("gaussian", 3, 0.8), 2)
    padded = np.pad(img, [C.same_padding(9, 3, 2), C.same_padding(7, 3, 2)], mode="reflect")
    out = C.apply(op, img).data
    assert out.shape == (5, 4)
    np.testing.assert_allclose(out, direct_correlate(padded, op.kernel, 2), atol=1e-12)


@pytest.mark.parametrize("size,stride", [(1, 1), (2, 2), (3, 2), (4, 4), (5, 3)])
def test_constant_image_is_fixed_point(size, stride, rng):
    kern = rng.uniform(0, 1, (size, size))
    out = C.apply(C.Downsample(kern, stride), np.full((13, 12), 77.25)).data
    np.testing.assert_allclose(out, 77.25, atol=1e-12)


def test_output_shape_is_ceil(rng):
    for h, w, s in [(8, 8, 4), (9, 10, 4), (5, 5, 2)]:
        op = C.Downsample(C.make_kernel("box", 3), s)
        out = C.apply(op, rng.random((h, w)))
        assert out.shape == C.output_shape(op, (h, w)) == (-(-h // s), -(-w // s))


def test_channels_are_independent(rng):
    img = rng.random((3, 8, 8))
    op = C.Downsample(C.make_kernel("gaussian", 3, 1.0), 2)
    out = C.apply(op, img).data
    for c in range(3):
        np.testing.assert_array_equal(out[c], C.apply(op, img[c]).data)


def test_downsample_commutes_with_scaling(rng):
    x = rng.uniform(-5, 5, (10, 10))
    op = C.Downsample(C.make_kernel("gaussian", 5, 1.3), 3)
    np.testing.assert_allclose(C.apply(op, 2.5 * x).data, 2.5 * C.apply(op, x).data, atol=1e-12)


def test_mask_identities(rng):
    x = rng.random((4, 5))
    np.testing.assert_array_equal(C.apply(C.Mask(np.ones((4, 5))), x).data, x)
    np.testing.assert_array_equal(C.apply(C.Mask(np.zeros((4, 5))), x).data, 0.0)


def test_mask_idempotent_and_linear(rng):
    m = C.Mask((rng.random((6, 6)) > 0.4).astype(float))
    x, y = rng.uniform(-3, 3, (2, 6, 6))
    once = C.apply(m, x).data
    assert np.array_equal(C.apply(m, once).data, once)
    lhs = C.apply(m, 1.5 * x - 0.7 * y).data
    np.testing.assert_allclose(lhs, 1.5 * once - 0.7 * C.apply(m, y).data, atol=1e-12)


@pytest.mark.parametrize("kind", ["downsample", "mask"])
def test_apply_gradient(kind, rng):
    op = (C.Downsample(C.make_kernel("gaussian", 3, 0.8), 2) if kind == "downsample"
          else C.Mask((rng.random((7, 7)) > 0.5).astype(float)))
    probe = rng.standard_normal(C.output_shape(op, (7, 7)))
    x = rng.uniform(-2, 2, (7, 7))
    loss = lambda t: ad.tsum(ad.square(ad.sub(C.apply(op, t), probe)))
    assert gradcheck(loss, x) < 1e-5


def test_kernel_construction():
    np.testing.assert_array_equal(C.make_kernel("box", 2), np.full((2, 2), 0.25))
    np.testing.assert_array_equal(C.make_kernel("gaussian", 1, 2.0), [[1.0]])
    z = 0.0
    expect = np.zeros((3, 3))
    for i, dy in enumerate((-1, 0, 1)):
        for j, dx in enumerate((-1, 0, 1)):
            expect[i, j] = np.exp(-(dy * dy + dx * dx) / (2 * 0.8 ** 2))
            z += expect[i, j]
    np.testing.assert_allclose(C.make_kernel("gaussian", 3, 0.8), expect / z, atol=1e-15)


def test_kernel_normalized_on_construction():
    op = C.Downsample(np.ones((2, 2)), 2)
    assert op.kernel.sum() == 1.0


def test_parse_kernel():
    np.testing.assert_array_equal(C.parse_kernel("box:3"), C.make_kernel("box", 3))
    np.testing.assert_array_equal(C.parse_kernel("gauss:3:0.8"), C.make_kernel("gaussian", 3, 0.8))
    for bad in ("box", "box:x", "gauss:3", "disk:3", "gauss:3:-1"):
        with pytest.raises(BadParameter):
            C.parse_kernel(bad)


def test_construction_errors():
    with pytest.raises(BadParameter):
        C.Downsample(np.array([[-1.0, 2.0]]), 1)
    with pytest.raises(BadParameter):
        C.Downsample(np.ones((2, 2)), 0)
    with pytest.raises(BadParameter):
        C.Mask(np.array([[0.0, 0.5]]))
    with pytest.raises(BadParameter):
        C.make_kernel("gaussian", 3)


def test_apply_errors():
    with pytest.raises(ShapeMismatch):
        C.apply(C.Mask(np.ones((3, 3))), np.ones((4, 4)))
    with pytest.raises(EmptyOutput):
        C.apply(C.Downsample(np.ones((5, 5)), 1), np.ones((4, 4)))


@pytest.mark.parametrize("name,pixels,expect", [
    ("white", np.full((4, 4), 255), np.ones((4, 4))),
    ("black", np.zeros((4, 4)), np.zeros((4, 4))),
    ("checker", (np.indices((4, 4)).sum(0) % 2) * 255, np.indices((4, 4)).sum(0) % 2),
])
def test_mask_from_pgm(tmp_path, name, pixels, expect):
    path = tmp_path / f"{name}.pgm"
    save_image(pixels, path)
    mask = C.mask_from_image(path)
    np.testing.assert_array_equal(mask.mask, expect)
    assert set(np.unique(mask.mask)) <= {0.0, 1.0}
    if name == "checker":
        assert mask.observed_fraction == 0.5


def test_mask_from_colour_image_is_rejected():
    with pytest.raises(BadImage):
        C.mask_from_image(np.zeros((3, 4, 4)))
