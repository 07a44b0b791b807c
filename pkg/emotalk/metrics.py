"""
Metric functions to evaluate generated talking heads.
Functions to compute landmark distances (F-LMD, M-LMD) and frame quality (SSIM, PSNR).
"""

import numpy as np
import numba as nb
from typing_extensions import Literal

from .landmarks import LandmarkFrame, LIP_IDX


SSIM_WIN = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
PIXEL_MAX = 255.


class NotApplicable:
    """
    Marker returned by `psnr` for identical images, written as "N/A" in reports.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return 'N/A'

    def __str__(self):
        return 'N/A'

    def __bool__(self):
        return False


NOT_APPLICABLE = NotApplicable()


def check_seq_inputs(pred_seq, gt_seq):

    def as_array(seq):
        if isinstance(seq, np.ndarray):
            return seq.astype(np.float64)
        if len(seq) == 0:
            return np.zeros((0, 0, 2))
        return np.stack([f.points if isinstance(f, LandmarkFrame) else np.asarray(f) for f in seq]).astype(np.float64)

    pred, gt = as_array(pred_seq), as_array(gt_seq)
    assert pred.shape[0] == gt.shape[0], \
        'pred_seq and gt_seq must have the same number of frames, got {0} and {1}.'.format(pred.shape[0], gt.shape[0])
    if pred.shape[0] == 0:
        raise ValueError('Cannot compute LMD on empty sequences.')
    if pred.shape[1:] != gt.shape[1:] or pred.shape[-1] != 2:
        raise ValueError('Frames must be (n_points, 2) and match, got {0} and {1}.'.format(pred.shape[1:], gt.shape[1:]))
    spaces = {f.coord_space for seq in (pred_seq, gt_seq) if not isinstance(seq, np.ndarray)
              for f in seq if isinstance(f, LandmarkFrame)}
    if len(spaces) > 1:
        raise ValueError('pred_seq and gt_seq must be in the same coordinate space.')
    return np.ascontiguousarray(pred), np.ascontiguousarray(gt)


@nb.njit(nb.f8(nb.f8[:, :, :], nb.f8[:, :, :]), cache=True)
def mean_point_dist(pred, gt):

    total = 0.
    for i in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            dx = pred[i, j, 0] - gt[i, j, 0]
            dy = pred[i, j, 1] - gt[i, j, 1]
            total += np.sqrt(dx * dx + dy * dy)
    return total / (pred.shape[0] * pred.shape[1])


def lmd(pred_seq, gt_seq, subset: Literal['full', 'lips'] = 'full'):
    """
    Landmark distance.

    Mean Euclidean distance between corresponding points, averaged over frames and points. With `subset='full'` all 68
    points are used (F-LMD), with `subset='lips'` only the lip points 48-67 (M-LMD).

    Parameters
    ----------
    pred_seq : list, ndarray
        Predicted frames, as a list of LandmarkFrame or an array of shape (V, 68, 2).
    gt_seq : list, ndarray
        Ground truth frames in the same space as `pred_seq`.
    subset : str
        Which points to use, either `full` or `lips`.

    Returns
    -------
    d : float
        Landmark distance in the units of the input space.
    """

    if subset not in ('full', 'lips'):
        raise ValueError('subset must be full or lips, got {0}.'.format(subset))
    pred, gt = check_seq_inputs(pred_seq, gt_seq)
    if subset == 'lips':
        pred = np.ascontiguousarray(pred[:, LIP_IDX])
        gt = np.ascontiguousarray(gt[:, LIP_IDX])

    return mean_point_dist(pred, gt)


def check_img_inputs(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError('Images must have the same shape, got {0} and {1}.'.format(a.shape, b.shape))
    return a, b


def psnr(a, b):
    """
    Peak signal-to-noise ratio.

    Parameters
    ----------
    a : ndarray
        Image with values in [0, 1] (H x W x 3 or H x W).
    b : ndarray
        Image with the shape of `a`.

    Returns
    -------
    p : float, NotApplicable
        10 * log10(255^2 / MSE) in dB, with the MSE computed at 255 scale. `NOT_APPLICABLE` if the images are
        identical.
    """

    a, b = check_img_inputs(a, b)
    mse = np.mean((a * PIXEL_MAX - b * PIXEL_MAX) ** 2)
    if mse == 0:
        return NOT_APPLICABLE
    return 10 * np.log10(PIXEL_MAX ** 2 / mse)


def gaussian_window(size=SSIM_WIN, sigma=SSIM_SIGMA):
    """
    Normalized 2-d Gaussian window (size x size).
    """

    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-x ** 2 / (2 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def to_gray(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        img = img.mean(axis=-1)
    return img * PIXEL_MAX


@nb.njit(nb.f8[:, :](nb.f8[:, :], nb.f8[:, :], nb.f8[:, :], nb.f8, nb.f8), cache=True)
def ssim_map(x, y, w, c1, c2):

    n = w.shape[0]
    H = x.shape[0] - n + 1
    W = x.shape[1] - n + 1
    out = np.zeros((H, W), dtype=nb.f8)
    for i in range(H):
        for j in range(W):
            mx, my, sxx, syy, sxy = 0., 0., 0., 0., 0.
            for u in range(n):
                for v in range(n):
                    a = x[i + u, j + v]
                    b = y[i + u, j + v]
                    k = w[u, v]
                    mx += k * a
                    my += k * b
                    sxx += k * (a * a)
                    syy += k * (b * b)
                    sxy += k * (a * b)
            vx = sxx - mx * mx
            vy = syy - my * my
            cxy = sxy - mx * my
            num = (2 * (mx * my) + c1) * (2 * cxy + c2)
            den = (mx * mx + my * my + c1) * (vx + vy + c2)
            out[i, j] = num / den
    return out


def ssim(a, b):
    """
    Structural similarity index.

    Images are converted to grayscale by channel mean and scaled to [0, 255]. Local statistics are taken over every
    valid 11 x 11 Gaussian window (sigma 1.5) and the SSIM map is averaged.

    Parameters
    ----------
    a : ndarray
        Image with values in [0, 1] (H x W x 3 or H x W).
    b : ndarray
        Image with the shape of `a`.

    Returns
    -------
    s : float
        SSIM in [-1, 1].
    """

    a, b = check_img_inputs(a, b)
    x, y = to_gray(a), to_gray(b)
    if min(x.shape) < SSIM_WIN:
        raise ValueError('Images of size {0}x{1} are smaller than the {2}x{2} SSIM window.'.format(
            x.shape[0], x.shape[1], SSIM_WIN))

    c1 = (SSIM_K1 * PIXEL_MAX) ** 2
    c2 = (SSIM_K2 * PIXEL_MAX) ** 2
    smap = ssim_map(np.ascontiguousarray(x), np.ascontiguousarray(y), gaussian_window(), c1, c2)

    return float(np.mean(smap))
