import pytest
import numpy as np
from ..landmarks import LandmarkFrame
from ..metrics import NotApplicable, NOT_APPLICABLE, check_seq_inputs, mean_point_dist, lmd, check_img_inputs, psnr
from ..metrics import gaussian_window, to_gray, ssim_map, ssim
from ..synth import TEMPLATE


def ssim_oracle(a, b):
    x = np.asarray(a, dtype=np.float64).mean(axis=-1) * 255
    y = np.asarray(b, dtype=np.float64).mean(axis=-1) * 255
    g = np.exp(-(np.arange(11) - 5.) ** 2 / (2 * 1.5 ** 2))
    w = np.outer(g, g) / np.outer(g, g).sum()
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    vals = []
    for i in range(x.shape[0] - 10):
        for j in range(x.shape[1] - 10):
            px, py = x[i:i + 11, j:j + 11], y[i:i + 11, j:j + 11]
            mx, my = np.sum(w * px), np.sum(w * py)
            vx = np.sum(w * (px - mx) ** 2)
            vy = np.sum(w * (py - my) ** 2)
            cxy = np.sum(w * (px - mx) * (py - my))
            vals.append(((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx ** 2 + my ** 2 + c1) * (vx + vy + c2)))
    return np.mean(vals)


def psnr_oracle(a, b):
    total = 0.
    n = 0
    for v, w in zip(np.ravel(a), np.ravel(b)):
        total += (255. * v - 255. * w) ** 2
        n += 1
    return 10 * np.log10(255. ** 2 / (total / n))


def lmd_oracle(pred, gt, idx):
    total = 0.
    for p, g in zip(pred, gt):
        for i in idx:
            total += np.sqrt((p[i, 0] - g[i, 0]) ** 2 + (p[i, 1] - g[i, 1]) ** 2)
    return total / (len(pred) * len(idx))


def test_not_applicable():
    assert NotApplicable() is NOT_APPLICABLE
    assert str(NOT_APPLICABLE) == 'N/A'
    assert repr(NOT_APPLICABLE) == 'N/A'
    assert not NOT_APPLICABLE


def test_check_seq_inputs():
    frames = [LandmarkFrame(TEMPLATE, 'normalized')] * 3
    pred, gt = check_seq_inputs(frames, frames)
    assert pred.shape == (3, 68, 2)
    assert pred.dtype == np.float64

    with pytest.raises(AssertionError):
        check_seq_inputs(frames, frames[:2])
    with pytest.raises(ValueError):
        check_seq_inputs([], [])
    with pytest.raises(ValueError):
        check_seq_inputs(frames, [LandmarkFrame(TEMPLATE, 'pixel')] * 3)
    with pytest.raises(ValueError):
        check_seq_inputs(np.zeros((3, 68, 2)), np.zeros((3, 20, 2)))


def test_mean_point_dist():
    pred = np.zeros((2, 3, 2))
    gt = np.zeros((2, 3, 2))
    gt[..., 0] = 3.
    gt[..., 1] = 4.
    assert mean_point_dist(pred, gt) == 5.


def test_lmd():
    frames = [LandmarkFrame(TEMPLATE, 'normalized')] * 4
    assert lmd(frames, frames, 'full') == 0.
    assert lmd(frames, frames, 'lips') == 0.

    # Moving non-lip points leaves M-LMD unchanged
    moved = TEMPLATE.copy()
    moved[:48] += 1.
    other = [LandmarkFrame(moved, 'normalized')] * 4
    assert lmd(other, frames, 'lips') == 0.
    assert abs(lmd(other, frames, 'full') - np.sqrt(2) * 48 / 68) < 1e-12

    with pytest.raises(ValueError):
        lmd(frames, frames, 'eyes')


def test_lmd_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        pred = rng.normal(size=(5, 68, 2))
        gt = rng.normal(size=(5, 68, 2))
        assert abs(lmd(pred, gt, 'full') - lmd_oracle(pred, gt, range(68))) < 1e-9
        assert abs(lmd(pred, gt, 'lips') - lmd_oracle(pred, gt, range(48, 68))) < 1e-9


def test_check_img_inputs():
    a, b = check_img_inputs(np.zeros((4, 4, 3), dtype=np.float32), np.ones((4, 4, 3)))
    assert a.dtype == np.float64
    with pytest.raises(ValueError):
        check_img_inputs(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))


def test_psnr():
    img = np.random.default_rng(1).random((32, 32, 3))
    assert psnr(img, img) is NOT_APPLICABLE

    # Constant error of 1/255 gives MSE 1
    other = img + 1 / 255
    assert abs(psnr(img, other) - 20 * np.log10(255.)) < 1e-6

    with pytest.raises(ValueError):
        psnr(img, img[:16])


def test_psnr_oracle():
    rng = np.random.default_rng(2)
    for _ in range(20):
        a = rng.random((32, 32, 3))
        b = rng.random((32, 32, 3))
        assert abs(psnr(a, b) - psnr_oracle(a, b)) < 1e-9


def test_gaussian_window():
    w = gaussian_window()
    assert w.shape == (11, 11)
    assert abs(w.sum() - 1.) < 1e-12
    assert np.allclose(w, w.T)
    assert np.unravel_index(np.argmax(w), w.shape) == (5, 5)


def test_to_gray():
    img = np.zeros((2, 2, 3))
    img[..., 0] = 1.
    assert np.allclose(to_gray(img), 85.)
    assert np.allclose(to_gray(np.ones((2, 2))), 255.)


def test_ssim():
    rng = np.random.default_rng(3)
    img = rng.random((32, 32, 3))
    assert ssim(img, img) == 1.

    other = rng.random((32, 32, 3))
    s = ssim(img, other)
    assert -1 <= s < 1
    assert ssim(other, img) == s

    smap = ssim_map(to_gray(img), to_gray(other), gaussian_window(), (0.01 * 255) ** 2, (0.03 * 255) ** 2)
    assert smap.shape == (22, 22)

    with pytest.raises(ValueError):
        ssim(np.zeros((10, 32, 3)), np.zeros((10, 32, 3)))
    with pytest.raises(ValueError):
        ssim(img, img[:, :20])


def test_ssim_oracle():
    rng = np.random.default_rng(4)
    for _ in range(20):
        a = rng.random((32, 32, 3))
        b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
        assert abs(ssim(a, b) - ssim_oracle(a, b)) < 1e-6


def test_psnr_properties():
    rng = np.random.default_rng(5)
    img = rng.random((32, 32, 3)) * (239 / 255)
    expected = 10 * np.log10(65025 / 256)
    assert abs(psnr(img, img + 16 / 255) - expected) < 1e-6
    assert abs(expected - 24.05) < 0.01

    # More noise, lower PSNR
    noise = rng.uniform(-1, 1, img.shape)
    vals = [psnr(img, img + amp * noise) for amp in (0.01, 0.02, 0.05, 0.1, 0.2, 0.4)]
    assert all(a > b for a, b in zip(vals[:-1], vals[1:]))


def test_ssim_complement():
    a = (np.random.default_rng(6).random((32, 32)) > 0.5).astype(np.float64)
    s = ssim(a, 1 - a)
    assert -1 <= s < 1
    assert ssim(1 - a, a) == s
