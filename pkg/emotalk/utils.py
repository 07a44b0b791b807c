"""
Utility functions.
Functions to seed runs and build small in-memory corpora.
"""

import random

import numpy as np
from numpy.random import default_rng
import torch

from .audio import align_to_video, extract_mfcc
from .landmarks import normalize, stack_frames
from .pre import VideoSample
from .synth import EMOTIONS, identity_face, oracle_landmarks, render_face, synth_audio


def set_seed(seed=0, deterministic=True):
    """
    Seeds python, numpy and torch. In deterministic mode torch runs single-threaded with deterministic kernels.
    """

    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    if deterministic:
        torch.set_num_threads(1)
        torch.use_deterministic_algorithms(True, warn_only=True)
        torch.backends.cudnn.deterministic = True
        torch.backends.cudnn.benchmark = False


def get_toy_data(n_videos=8, seconds=0.6, img_size=32, n_mfcc=13, emotions=EMOTIONS, seed=42):
    """
    Generate a toy in-memory corpus for testing.

    Parameters
    ----------
    n_videos : int
        Number of videos to generate.
    seconds : float
        Audio duration of each video.
    img_size : int
        Side of the rendered frames.
    n_mfcc : int
        Cepstral coefficients per window.
    emotions : tuple
        Emotions to cycle through.
    seed : int
        Random seed to use.

    Returns
    -------
    samples : list of VideoSample
        Videos with in-memory frames, all in the train split.
    """

    palette = {'skin': (0.87, 0.72, 0.60), 'lip': (0.70, 0.30, 0.35), 'feature': (0.20, 0.15, 0.10),
               'mouth': (0.25, 0.05, 0.08), 'background': (0.15, 0.20, 0.30)}

    samples = []
    for i in range(n_videos):
        rng = default_rng([seed, i])
        emotion = emotions[i % len(emotions)]
        w = synth_audio(seconds, emotion, rng)
        audio = align_to_video(extract_mfcc(w, n_mfcc))
        frames = oracle_landmarks(w, emotion, img_size, template=identity_face(rng))
        n = min(audio.n_frames, len(frames))
        frames = frames[:n]
        samples.append(VideoSample(
            id='toy{0:02d}'.format(i),
            emotion=emotion,
            split='train',
            audio=audio.per_video_frame[:n].astype(np.float32),
            shapes=stack_frames([normalize(f) for f in frames]),
            pixels=np.stack([f.points for f in frames]),
            images=np.stack([render_face(f.points, img_size, palette) for f in frames]).astype(np.float32),
        ))

    return samples
