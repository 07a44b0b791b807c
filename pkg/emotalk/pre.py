"""
Preprocessing functions.
Functions to read corpus manifests and turn videos into aligned training samples.
"""

import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from .audio import align_to_video, extract_mfcc, load_wav
from .landmarks import load_landmarks, normalize, stack_frames
from .synth import EMOTIONS, one_hot
from .utils_io import list_frames, read_frame


MANIFEST = 'manifest.json'
REQUIRED_COLUMNS = ('id', 'emotion', 'split', 'audio', 'landmarks', 'frames')


@dataclass
class VideoSample:
    """
    One video aligned to its video frames.

    Attributes
    ----------
    id : str
        Video identifier.
    emotion : str
        Emotion label.
    split : str
        `train` or `test`.
    audio : ndarray
        Aligned MFCC blocks (V x W*C).
    shapes : ndarray
        Normalized landmark frames, flattened (V x 136).
    pixels : ndarray
        Pixel-space landmarks (V x 68 x 2).
    reference : int
        Index of the reference frame.
    frame_paths : list, None
        PNG path of every frame.
    images : ndarray, None
        In-memory frames (V x H x W x 3), used when `frame_paths` is None.
    """

    id: str
    emotion: str
    split: str
    audio: np.ndarray
    shapes: np.ndarray
    pixels: np.ndarray
    reference: int = 0
    frame_paths: Optional[list] = None
    images: Optional[np.ndarray] = None

    @property
    def n_frames(self):
        return self.audio.shape[0]

    @property
    def label(self):
        return one_hot(self.emotion)

    @property
    def ref_shape(self):
        return self.shapes[self.reference]

    def frame(self, i):
        if self.images is not None:
            return self.images[i]
        return read_frame(self.frame_paths[i])

    @property
    def ref_image(self):
        return self.frame(self.reference)


def read_manifest(data_dir):
    """
    Reads and validates a corpus manifest.

    Parameters
    ----------
    data_dir : str
        Corpus directory holding `manifest.json`.

    Returns
    -------
    manifest : DataFrame
        One row per video.
    """

    path = os.path.join(data_dir, MANIFEST)
    if not os.path.isfile(path):
        raise FileNotFoundError('No {0} found in {1}. Run `emotalk synth-data` or write one.'.format(MANIFEST, data_dir))
    with open(path, 'r') as fh:
        manifest = pd.DataFrame(json.load(fh)['videos'])

    missing = [c for c in REQUIRED_COLUMNS if c not in manifest.columns]
    if missing:
        raise ValueError('Manifest {0} misses the columns {1}.'.format(path, missing))
    if manifest['id'].duplicated().any():
        raise ValueError('Manifest {0} contains repeated video ids, please make them unique.'.format(path))
    bad = ~manifest['split'].isin(['train', 'test'])
    if bad.any():
        raise ValueError('Videos {0} have a split other than train or test.'.format(list(manifest['id'][bad])))
    bad = ~manifest['emotion'].isin(EMOTIONS)
    if bad.any():
        raise ValueError('Videos {0} have unknown emotions, valid ones are {1}.'.format(list(manifest['id'][bad]), EMOTIONS))
    if 'reference' not in manifest.columns:
        manifest['reference'] = 0

    return manifest


def load_video(data_dir, row, n_mfcc=13, fps=25):
    """
    Loads one manifest row as a VideoSample.

    Audio and landmarks are cropped to the shorter of the two sequences.
    """

    audio = align_to_video(extract_mfcc(load_wav(os.path.join(data_dir, row['audio'])), n_mfcc), fps)
    frames, _ = load_landmarks(os.path.join(data_dir, row['landmarks']))
    frame_dir = os.path.join(data_dir, row['frames'])
    frame_paths = [os.path.join(frame_dir, f) for f in list_frames(frame_dir)]

    n = min(audio.n_frames, len(frames), len(frame_paths))
    if n == 0:
        raise ValueError('Video {0} has no aligned frames.'.format(row['id']))
    if max(audio.n_frames, len(frames)) - n > 1:
        warnings.warn('Video {0}: {1} audio frames, {2} landmark frames and {3} images, cropping to {4}.'.format(
            row['id'], audio.n_frames, len(frames), len(frame_paths), n))
    if int(row['reference']) >= n:
        raise ValueError('Video {0}: reference frame {1} is out of range.'.format(row['id'], row['reference']))

    frames = frames[:n]
    return VideoSample(
        id=row['id'],
        emotion=row['emotion'],
        split=row['split'],
        audio=audio.per_video_frame[:n].astype(np.float32),
        shapes=stack_frames([normalize(f) for f in frames]),
        pixels=np.stack([f.points for f in frames]),
        reference=int(row['reference']),
        frame_paths=frame_paths[:n],
    )


def load_corpus(data_dir, split='train', max_samples=None, n_mfcc=13, fps=25, num_workers=0, verbose=False):
    """
    Loads the videos of one split.

    Parameters
    ----------
    data_dir : str
        Corpus directory.
    split : str, None
        `train`, `test`, or None for every video.
    max_samples : int, None
        Keep the first `max_samples` videos of the split.
    n_mfcc : int
        Cepstral coefficients per window.
    fps : int
        Video frame rate.
    num_workers : int
        If larger than 0, videos are loaded by a thread pool. The set of samples is the same, in manifest order.
    verbose : bool
        Whether to show progress.

    Returns
    -------
    samples : list of VideoSample
        Loaded videos.
    """

    manifest = read_manifest(data_dir)
    if split is not None:
        manifest = manifest[manifest['split'] == split]
    if max_samples is not None:
        manifest = manifest.iloc[:max_samples]
    if manifest.shape[0] == 0:
        raise ValueError('No videos found for split {0} in {1}.'.format(split, data_dir))

    if verbose:
        print('Loading {0} videos from {1}'.format(manifest.shape[0], data_dir))

    rows = [row for _, row in manifest.iterrows()]
    if num_workers > 0:
        with ThreadPoolExecutor(max_workers=num_workers) as pool:
            it = pool.map(lambda r: load_video(data_dir, r, n_mfcc, fps), rows)
            samples = list(tqdm(it, total=len(rows), disable=not verbose))
    else:
        samples = [load_video(data_dir, r, n_mfcc, fps) for r in tqdm(rows, disable=not verbose)]

    return samples


def check_disjoint(manifest):
    """
    Asserts that no video appears in both splits.
    """

    train = set(manifest['id'][manifest['split'] == 'train'])
    test = set(manifest['id'][manifest['split'] == 'test'])
    inter = train & test
    if inter:
        raise ValueError('Videos {0} are in both train and test splits.'.format(sorted(inter)))


def crop_batch(samples):
    """
    Stacks videos cropped to the shortest one.

    Returns
    -------
    audio : ndarray
        B x V x W*C aligned audio.
    shapes : ndarray
        B x V x 136 normalized landmarks.
    refs : ndarray
        B x 136 normalized reference shapes.
    labels : ndarray
        B x V x 8 one-hot emotion labels.
    """

    n = min(s.n_frames for s in samples)
    audio = np.stack([s.audio[:n] for s in samples])
    shapes = np.stack([s.shapes[:n] for s in samples])
    refs = np.stack([s.ref_shape for s in samples])
    labels = np.stack([np.tile(s.label, (n, 1)) for s in samples])
    return audio, shapes, refs, labels


def feature_stats(samples):
    """
    Per-dimension mean and standard deviation of the aligned audio blocks.
    """

    x = np.concatenate([s.audio for s in samples]).astype(np.float64)
    return x.mean(axis=0), x.std(axis=0)
