"""
Inference.
End-to-end pipeline from an audio clip and a reference face to landmark and frame sequences.
"""

import json
import os

import numpy as np
import torch
from tqdm import tqdm

import cv2

from .audio import align_to_video, extract_mfcc, load_wav
from .landmarks import denormalize, load_landmarks, normalization_params, normalize, rasterize
from .landmarks import save_landmarks
from .model_aatu import make_translator_input, to_chw, to_hwc
from .train import load_stage1, load_stage2
from .utils_io import load_checkpoint, read_frame, write_frame


def read_reference(ref_image, ref_landmarks, img_size):
    """
    Loads the reference frame, resized to img_size, and its first landmark frame.
    """

    img = read_frame(ref_image)
    if img.shape[0] != img_size or img.shape[1] != img_size:
        img = cv2.resize(img, (img_size, img_size), interpolation=cv2.INTER_AREA)
    frames, size = load_landmarks(ref_landmarks)
    return img, frames[0], size


def infer(audio, ref_image, ref_landmarks, ckpt_lm, ckpt_render, out_dir, batch_size=16, verbose=False):
    """
    Generates a talking-head frame sequence.

    The audio is turned into aligned MFCC blocks, the landmark model predicts one normalized shape per video frame
    from the blocks and the normalized reference shape, and the translator renders every predicted shape as a sketch
    stacked with the reference frame.

    Parameters
    ----------
    audio : str
        Path to a WAV file.
    ref_image : str
        Path to the reference frame (PNG).
    ref_landmarks : str
        Landmark JSON-lines file whose first frame describes the reference face.
    ckpt_lm : str
        Stage-one checkpoint.
    ckpt_render : str
        Stage-two checkpoint.
    out_dir : str
        Output directory. Receives `frames/NNNNNN.png`, `landmarks.jsonl` (pixel space of the reference) and
        `index.json`.
    batch_size : int
        Frames rendered per forward pass.
    verbose : bool
        Whether to show progress.

    Returns
    -------
    index : dict
        Content of `index.json`: fps, n_frames, frame file names and landmark file.
    """

    for path in (audio, ref_image, ref_landmarks, ckpt_lm, ckpt_render):
        if not os.path.isfile(path):
            raise FileNotFoundError('Input {0} not found.'.format(path))

    ck1, ck2 = load_checkpoint(ckpt_lm), load_checkpoint(ckpt_render)
    lm_model, translator = load_stage1(ck1), load_stage2(ck2)
    n_mfcc, fps = ck1.config['n_mfcc'], ck1.config['fps']
    img_size = ck2.config['img_size']

    aligned = align_to_video(extract_mfcc(load_wav(audio), n_mfcc), fps)
    if aligned.is_empty:
        raise ValueError('Audio {0} is shorter than one video frame at {1} fps.'.format(audio, fps))
    if aligned.dim != ck1.meta['audio_dim']:
        raise ValueError('Audio blocks have {0} features but the landmark model expects {1}.'.format(
            aligned.dim, ck1.meta['audio_dim']))

    img, ref_frame, size = read_reference(ref_image, ref_landmarks, img_size)
    centroid, scale = normalization_params(ref_frame)
    ref = normalize(ref_frame)

    if verbose:
        print('Running inference on {0} frames'.format(aligned.n_frames))

    with torch.no_grad():
        out = lm_model(torch.as_tensor(ref.flatten(), dtype=torch.float32).unsqueeze(0),
                       torch.as_tensor(aligned.per_video_frame, dtype=torch.float32).unsqueeze(0))
    shapes = out.frames(0)

    os.makedirs(os.path.join(out_dir, 'frames'), exist_ok=True)
    save_landmarks([denormalize(f, centroid, scale) for f in shapes], os.path.join(out_dir, 'landmarks.jsonl'), *size)

    ref_t = to_chw(img)
    names = []
    for start in tqdm(range(0, len(shapes), batch_size), disable=not verbose):
        chunk = shapes[start:start + batch_size]
        sketches = torch.as_tensor(np.stack([rasterize(f, img_size) for f in chunk]), dtype=torch.float32)
        with torch.no_grad():
            frames = translator(make_translator_input(sketches, ref_t))
        for i, frame in enumerate(frames):
            name = '{0:06d}.png'.format(start + i)
            write_frame(to_hwc(frame), os.path.join(out_dir, 'frames', name))
            names.append(name)

    index = {'fps': fps, 'n_frames': len(names), 'frames': ['frames/{0}'.format(n) for n in names],
             'landmarks': 'landmarks.jsonl'}
    with open(os.path.join(out_dir, 'index.json'), 'w') as fh:
        json.dump(index, fh, indent=2)

    return index
