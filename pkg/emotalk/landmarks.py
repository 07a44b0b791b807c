"""
Landmark space.
Functions to normalize, PCA-reduce, rasterize and store 68-point face landmarks.
"""

import json
import os
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh
from typing_extensions import Literal

import numba as nb


N_POINTS = 68
LIP_IDX = np.arange(48, 68)
LIP_COORDS = np.concatenate([2 * LIP_IDX, 2 * LIP_IDX + 1])
LEFT_EYE_CORNERS = (36, 39)
RIGHT_EYE_CORNERS = (42, 45)

# Fixed 68-point connectivity: (first, last, closed)
CONNECTIVITY = (
    (0, 16, False),   # jaw
    (17, 21, False),  # right brow
    (22, 26, False),  # left brow
    (27, 30, False),  # nose bridge
    (31, 35, False),  # nostrils
    (36, 41, True),   # right eye
    (42, 47, True),   # left eye
    (48, 59, True),   # outer lips
    (60, 67, True),   # inner lips
)

# Half-extent of a normalized face in inter-ocular units, padded 1.5x for rasterization
FACE_HALF_EXTENT = 1.25
RASTER_PAD = 1.5

CoordSpace = Literal['pixel', 'normalized']


def get_segments():
    segs = []
    for first, last, closed in CONNECTIVITY:
        segs.extend((i, i + 1) for i in range(first, last))
        if closed:
            segs.append((last, first))
    return np.array(segs, dtype=np.int64)


SEGMENTS = get_segments()


@dataclass(frozen=True)
class LandmarkFrame:
    """
    68-point 2-d face shape.
    """

    points: np.ndarray
    coord_space: CoordSpace = 'pixel'

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.shape != (N_POINTS, 2):
            raise ValueError('Landmark frame must have shape ({0}, 2), got {1}.'.format(N_POINTS, points.shape))
        if self.coord_space not in ('pixel', 'normalized'):
            raise ValueError('coord_space must be pixel or normalized, got {0}.'.format(self.coord_space))
        object.__setattr__(self, 'points', points)

    def flatten(self):
        return self.points.reshape(-1)

    @classmethod
    def from_flat(cls, flat, coord_space='normalized'):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != 2 * N_POINTS:
            raise ValueError('Expected {0} coordinates, got {1}.'.format(2 * N_POINTS, flat.size))
        return cls(flat.reshape(N_POINTS, 2), coord_space)


@dataclass(frozen=True)
class PcaBasis:
    """
    Linear shape model over flattened 136-d landmark frames.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def k(self):
        return self.components.shape[0]


@dataclass(frozen=True)
class PcaCoeffs:
    values: np.ndarray


def lip_subset(f):
    """
    Lip points (indices 48-67) of a frame or of an array of frames (..., 68, 2).
    """

    points = f.points if isinstance(f, LandmarkFrame) else np.asarray(f)
    return points[..., LIP_IDX, :].copy()


def inter_ocular(points):
    left = points[list(LEFT_EYE_CORNERS)].mean(axis=0)
    right = points[list(RIGHT_EYE_CORNERS)].mean(axis=0)
    return np.linalg.norm(right - left)


def normalization_params(f):
    """
    Centroid and inter-ocular distance used by `normalize`.
    """

    centroid = f.points.mean(axis=0)
    scale = inter_ocular(f.points)
    if not np.isfinite(scale) or scale < 1e-12:
        raise ValueError('Degenerate landmark frame: eye landmarks coincide (inter-ocular distance {0}).'.format(scale))
    return centroid, scale


def normalize(f):
    """
    Moves a frame to normalized landmark space.

    The centroid is moved to the origin and coordinates are divided by the inter-ocular distance, taken between the
    midpoints of each eye's corner pair.

    Parameters
    ----------
    f : LandmarkFrame
        Frame to normalize.

    Returns
    -------
    f : LandmarkFrame
        Frame with centroid at (0, 0), inter-ocular distance 1 and coord_space normalized.
    """

    centroid, scale = normalization_params(f)
    return LandmarkFrame((f.points - centroid) / scale, 'normalized')


def denormalize(f, centroid, scale):
    """
    Inverse of `normalize` for known normalization parameters.
    """

    return LandmarkFrame(f.points * scale + np.asarray(centroid), 'pixel')


def stack_frames(frames):
    return np.stack([f.flatten() for f in frames]).astype(np.float64)


def fit_pca(corpus, k=20):
    """
    Fits a PCA shape model to normalized frames.

    Parameters
    ----------
    corpus : list of LandmarkFrame
        Normalized frames. Must contain more than `k` frames.
    k : int
        Number of components to keep.

    Returns
    -------
    basis : PcaBasis
        Top-k eigenvectors of the 136-d covariance, sorted by decreasing variance. Each component is signed so that its
        largest-magnitude entry is positive.
    """

    if len(corpus) <= k:
        raise ValueError('PCA needs more frames than components, got {0} frames for k={1}.'.format(len(corpus), k))
    if any(f.coord_space != 'normalized' for f in corpus):
        raise ValueError('All frames must be normalized before fitting PCA, run normalize first.')

    X = stack_frames(corpus)
    mean = X.mean(axis=0)
    Xc = X - mean
    rank = np.linalg.matrix_rank(Xc)
    if k > rank:
        raise ValueError('k={0} is larger than the rank of the centered corpus ({1}). Reduce k.'.format(k, rank))

    cov = Xc.T @ Xc / (X.shape[0] - 1)
    evals, evecs = eigh(cov)
    idx = np.argsort(evals)[::-1][:k]
    evals, comps = evals[idx], evecs[:, idx].T

    # Sign convention
    signs = np.sign(comps[np.arange(k), np.argmax(np.abs(comps), axis=1)])
    comps = comps * signs[:, None]

    return PcaBasis(mean, np.ascontiguousarray(comps), np.maximum(evals, 0.0))


def project(f, basis):
    """
    Coefficients of a normalized frame in a PCA basis.
    """

    x = f.flatten() if isinstance(f, LandmarkFrame) else np.asarray(f, dtype=np.float64)
    if x.shape[-1] != basis.mean.size:
        raise ValueError('Frame has {0} coordinates but the basis expects {1}.'.format(x.shape[-1], basis.mean.size))
    return PcaCoeffs((x - basis.mean) @ basis.components.T)


def reconstruct(c, basis):
    """
    Normalized frame from PCA coefficients.
    """

    values = c.values if isinstance(c, PcaCoeffs) else np.asarray(c, dtype=np.float64)
    if values.shape[-1] != basis.k:
        raise ValueError('Got {0} coefficients for a basis with k={1}.'.format(values.shape[-1], basis.k))
    return LandmarkFrame.from_flat(basis.mean + values @ basis.components, 'normalized')


def to_canvas(points, size):
    """
    Maps normalized coordinates to pixel coordinates of a size x size canvas, clipping to the padded face box.
    """

    half = FACE_HALF_EXTENT * RASTER_PAD
    p = np.clip(points, -half, half)
    return (p + half) / (2 * half) * (size - 1)


@nb.njit(nb.f8[:, :](nb.f8[:, :], nb.i8[:, :], nb.i8), cache=True)
def draw_segments(pts, segs, size):

    img = np.zeros((size, size), dtype=nb.f8)
    for s in range(segs.shape[0]):
        ax, ay = pts[segs[s, 0], 0], pts[segs[s, 0], 1]
        bx, by = pts[segs[s, 1], 0], pts[segs[s, 1], 1]
        dx, dy = bx - ax, by - ay
        ll = dx * dx + dy * dy

        # Bounding box of the 1-px band
        x0 = max(int(np.floor(min(ax, bx))) - 1, 0)
        x1 = min(int(np.ceil(max(ax, bx))) + 1, size - 1)
        y0 = max(int(np.floor(min(ay, by))) - 1, 0)
        y1 = min(int(np.ceil(max(ay, by))) + 1, size - 1)

        for i in range(y0, y1 + 1):
            for j in range(x0, x1 + 1):
                if ll > 0:
                    t = ((j - ax) * dx + (i - ay) * dy) / ll
                    t = min(max(t, 0.0), 1.0)
                else:
                    t = 0.0
                ex = j - (ax + t * dx)
                ey = i - (ay + t * dy)
                v = 1.0 - np.sqrt(ex * ex + ey * ey)
                if v > img[i, j]:
                    img[i, j] = v
    return img


def rasterize(f, size=128):
    """
    Draws a landmark sketch.

    Landmark polylines (jaw, brows, nose, eyes, outer and inner lips) are drawn on a fixed connectivity table as
    anti-aliased 1-px lines, where a pixel's intensity is 1 minus its distance to the nearest segment.

    Parameters
    ----------
    f : LandmarkFrame
        Normalized frame.
    size : int
        Output side in pixels, at least 32.

    Returns
    -------
    img : ndarray
        Single-channel image (size x size) with values in [0, 1].
    """

    if f.coord_space != 'normalized':
        raise ValueError('rasterize expects a normalized frame, run normalize first.')
    if size < 32:
        raise ValueError('size must be at least 32, got {0}.'.format(size))

    pts = np.ascontiguousarray(to_canvas(f.points, size))
    return draw_segments(pts, SEGMENTS, int(size))


def save_landmarks(frames, path, w, h):
    """
    Writes frames as JSON-lines, one frame per line: {"frame", "w", "h", "pts"}.
    """

    with open(path, 'w') as fh:
        for i, f in enumerate(frames):
            points = f.points if isinstance(f, LandmarkFrame) else np.asarray(f)
            row = {'frame': i, 'w': int(w), 'h': int(h), 'pts': [[float(x), float(y)] for x, y in points]}
            fh.write(json.dumps(row) + '\n')


def load_landmarks(path):
    """
    Reads a landmark JSON-lines file.

    Parameters
    ----------
    path : str
        Path to the file.

    Returns
    -------
    frames : list of LandmarkFrame
        Pixel-space frames sorted by frame index.
    size : tuple
        Image (w, h) recorded in the file.
    """

    if not os.path.isfile(path):
        raise FileNotFoundError('Landmark file {0} not found.'.format(path))

    rows = []
    with open(path, 'r') as fh:
        for n, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                rows.append((int(row['frame']), LandmarkFrame(row['pts']), (int(row['w']), int(row['h']))))
            except (KeyError, TypeError, json.JSONDecodeError) as e:
                raise ValueError('Malformed landmark record at line {0} of {1}: {2}'.format(n + 1, path, e)) from e
    if len(rows) == 0:
        raise ValueError('Landmark file {0} is empty.'.format(path))

    rows.sort(key=lambda r: r[0])
    return [r[1] for r in rows], rows[0][2]
