"""
Synthetic corpus.
Functions to generate a deterministic talking-face corpus whose audio envelope drives the mouth and whose carrier
frequency and face shape encode emotion.
"""

import json
import os
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd
from numpy.random import default_rng
from tqdm import tqdm

import cv2

from .audio import SAMPLE_RATE, Waveform, frame_envelope, save_wav
from .landmarks import LandmarkFrame, N_POINTS, save_landmarks
from .utils_io import write_frame


# MEAD basic emotions, in one-hot order
EMOTIONS = ('angry', 'contempt', 'disgusted', 'fear', 'happy', 'neutral', 'sad', 'surprised')

# emotion: (brow offset, lip-corner offset, carrier Hz). Offsets in inter-ocular units, +y is down.
EMOTION_PARAMS = {
    'angry': (0.10, 0.06, 250.),
    'contempt': (0.05, -0.06, 450.),
    'disgusted': (0.08, 0.10, 700.),
    'fear': (-0.12, 0.08, 950.),
    'happy': (-0.05, -0.12, 1200.),
    'neutral': (0.00, 0.00, 1500.),
    'sad': (-0.10, 0.12, 1800.),
    'surprised': (-0.18, 0.00, 2100.),
}

FPS = 25
MAX_OPENING = 0.35
A_MIN = 0.2
AMPLITUDE = 0.6
CARRIER_RMS = AMPLITUDE * np.sqrt(0.5 + 0.125)
MOUTH_Y = 1.0
OUTER_HALF_WIDTH = 0.4
INNER_HALF_WIDTH = 0.3
LIP_THICKNESS = 0.06
FACE_SCALE = 0.2
FACE_CENTER_Y = 0.36


@dataclass(frozen=True)
class SynthSpec:
    """
    Synthetic corpus settings.

    Attributes
    ----------
    n_videos : int
        Number of videos.
    seconds_per_video : float
        Audio duration of each video.
    seed : int
        Corpus seed. Same seed gives a byte-identical corpus.
    emotion_set : tuple
        Emotion labels to cycle through, a subset of `EMOTIONS`.
    img_size : int
        Side of the square frames.
    skin_rgb, lip_rgb, feature_rgb, mouth_rgb, background_rgb : tuple
        Flat-shading palette.
    skin_jitter : float
        Per-video uniform jitter added to the skin color.
    jitter_px : float
        Per-video uniform jitter of the face position in pixels.
    shape_jitter : float
        Standard deviation of the per-video perturbation of the rest face, in inter-ocular units.
    """

    n_videos: int = 50
    seconds_per_video: float = 2.0
    seed: int = 0
    emotion_set: tuple = EMOTIONS
    img_size: int = 128
    skin_rgb: tuple = (0.87, 0.72, 0.60)
    lip_rgb: tuple = (0.70, 0.30, 0.35)
    feature_rgb: tuple = (0.20, 0.15, 0.10)
    mouth_rgb: tuple = (0.25, 0.05, 0.08)
    background_rgb: tuple = (0.15, 0.20, 0.30)
    skin_jitter: float = 0.05
    jitter_px: float = 2.0
    shape_jitter: float = 0.02

    def __post_init__(self):
        object.__setattr__(self, 'emotion_set', tuple(self.emotion_set))
        unknown = [e for e in self.emotion_set if e not in EMOTIONS]
        if unknown:
            raise ValueError('Unknown emotions {0}, valid ones are {1}.'.format(unknown, EMOTIONS))
        if self.n_videos < 1 or self.seconds_per_video <= 0:
            raise ValueError('n_videos and seconds_per_video must be positive.')
        if self.img_size < 32:
            raise ValueError('img_size must be at least 32, got {0}.'.format(self.img_size))

    @classmethod
    def from_json(cls, path):
        with open(path, 'r') as fh:
            d = json.load(fh)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError('Unknown SynthSpec keys: {0}.'.format(sorted(unknown)))
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


def check_emotion(emotion):
    if emotion not in EMOTION_PARAMS:
        raise ValueError('Unknown emotion "{0}", valid ones are {1}.'.format(emotion, EMOTIONS))
    return EMOTION_PARAMS[emotion]


def one_hot(emotion):
    check_emotion(emotion)
    y = np.zeros(len(EMOTIONS), dtype=np.float32)
    y[EMOTIONS.index(emotion)] = 1
    return y


def template_face():
    """
    Neutral closed-mouth face in inter-ocular units (68 x 2), eye midpoints at (-0.5, 0) and (0.5, 0).
    """

    p = np.zeros((N_POINTS, 2))

    t = np.pi * np.arange(17) / 16
    p[0:17, 0] = -1.05 * np.cos(t)
    p[0:17, 1] = 0.1 + 1.45 * np.sin(t)

    u = np.linspace(-1, 1, 5)
    for start, cx in ((17, -0.55), (22, 0.55)):
        p[start:start + 5, 0] = cx + 0.35 * u
        p[start:start + 5, 1] = -0.35 - 0.08 * (1 - u ** 2)

    p[27:31, 1] = np.linspace(0.05, 0.5, 4)
    p[31:36, 0] = 0.2 * u
    p[31:36, 1] = 0.65 - 0.03 * (1 - u ** 2)

    # Corners, two upper lid points, corner, two lower lid points
    for start, (xo, xi) in ((36, (-0.75, -0.25)), (42, (0.25, 0.75))):
        xs = np.linspace(xo, xi, 4)
        p[start:start + 6] = [[xs[0], 0], [xs[1], -0.08], [xs[2], -0.08], [xs[3], 0], [xs[2], 0.08], [xs[1], 0.08]]

    # Outer lips: left corner, upper lip, right corner, lower lip back
    x_up = np.linspace(-OUTER_HALF_WIDTH, OUTER_HALF_WIDTH, 7)
    p[48:55, 0] = x_up
    p[55:60, 0] = x_up[1:6][::-1]
    p[48:55, 1] = MOUTH_Y - LIP_THICKNESS * (1 - (x_up / OUTER_HALF_WIDTH) ** 2)
    p[55:60, 1] = MOUTH_Y + LIP_THICKNESS * (1 - (p[55:60, 0] / OUTER_HALF_WIDTH) ** 2)

    # Inner lips: left corner, upper, right corner, lower back
    x_in = np.linspace(-INNER_HALF_WIDTH, INNER_HALF_WIDTH, 5)
    p[60:65, 0] = x_in
    p[65:68, 0] = x_in[1:4][::-1]
    p[60:68, 1] = MOUTH_Y

    return p


TEMPLATE = template_face()
UPPER_LIP = np.r_[49:54, 61:64]
LOWER_LIP = np.r_[55:60, 65:68]


def identity_face(rng, shape_jitter=0.02):
    """
    Rest face of one synthetic identity: `TEMPLATE` plus Gaussian point noise.
    """

    return TEMPLATE + rng.normal(0., shape_jitter, TEMPLATE.shape)


def face_shape(envelope, emotion, template=None):
    """
    Closed-form face for one frame.

    The mouth opens linearly with the envelope: upper lip points rise by 0.3 * o * (1 - u^2) and lower lip points drop
    by 0.7 * o * (1 - u^2), where o = 0.35 * envelope and u is the horizontal position relative to the lip half-width.
    The chin follows the lower lip. Brows move by the emotion's brow offset and lip points by c * u^2, c being the
    emotion's corner offset (0.75 c on the inner lip).

    Parameters
    ----------
    envelope : float
        Mouth-driving envelope in [0, 1]. 0 is the rest pose.
    emotion : str
        Emotion label.
    template : ndarray, None
        Rest face (68 x 2) in inter-ocular units. Defaults to `TEMPLATE`.

    Returns
    -------
    p : ndarray
        Face points (68 x 2) in inter-ocular units.
    """

    brow, corner, _ = check_emotion(emotion)
    p = np.array(TEMPLATE if template is None else template, dtype=np.float64)
    e = float(np.clip(envelope, 0., 1.))
    o = MAX_OPENING * e

    u = np.zeros(N_POINTS)
    u[48:60] = p[48:60, 0] / OUTER_HALF_WIDTH
    u[60:68] = p[60:68, 0] / INNER_HALF_WIDTH
    profile = 1 - u ** 2

    p[UPPER_LIP, 1] -= 0.3 * o * profile[UPPER_LIP]
    p[LOWER_LIP, 1] += 0.7 * o * profile[LOWER_LIP]
    t = np.pi * np.arange(17) / 16
    p[0:17, 1] += 0.4 * o * np.sin(t) ** 2

    p[17:27, 1] += brow
    p[48:60, 1] += corner * u[48:60] ** 2
    p[60:68, 1] += 0.75 * corner * u[60:68] ** 2

    return p


def mouth_opening(f):
    """
    Inner-lip gap between points 62 and 66 in units of the frame.
    """

    points = f.points if isinstance(f, LandmarkFrame) else np.asarray(f)
    return points[66, 1] - points[62, 1]


def audio_envelope(w, fps=FPS):
    """
    Per-frame mouth-driving envelope in [0, 1] recovered from the audio RMS.
    """

    rms = frame_envelope(w, fps)
    return np.clip((rms / CARRIER_RMS - A_MIN) / (1 - A_MIN), 0., 1.)


def to_pixels(p, img_size, offset=(0., 0.)):
    scale = img_size * FACE_SCALE
    center = np.array([img_size / 2 + offset[0], img_size * FACE_CENTER_Y + offset[1]])
    return p * scale + center


def oracle_landmarks(audio, emotion, img_size=128, offset=(0., 0.), template=None):
    """
    Ground-truth landmark sequence of an audio clip.

    Parameters
    ----------
    audio : Waveform
        16 kHz waveform.
    emotion : str
        Emotion label.
    img_size : int
        Frame side, sets the pixel scale (0.2 * img_size per inter-ocular unit).
    offset : tuple
        Face translation in pixels.
    template : ndarray, None
        Rest face. Defaults to `TEMPLATE`.

    Returns
    -------
    frames : list of LandmarkFrame
        One pixel-space frame per aligned video frame.
    """

    check_emotion(emotion)
    env = audio_envelope(audio)
    return [LandmarkFrame(to_pixels(face_shape(e, emotion, template), img_size, offset), 'pixel') for e in env]


def synth_audio(seconds, emotion, rng):
    """
    Amplitude-modulated two-harmonic tone at the emotion's carrier frequency.

    The amplitude is A_MIN + (1 - A_MIN) * s(t) with a raised-cosine syllable envelope s(t) at a random rate in
    [2, 5] Hz and a random phase.
    """

    _, _, carrier = check_emotion(emotion)
    n = int(round(seconds * SAMPLE_RATE))
    t = np.arange(n) / SAMPLE_RATE
    rate = rng.uniform(2., 5.)
    phase = rng.uniform(0., 2 * np.pi)
    s = 0.5 - 0.5 * np.cos(2 * np.pi * rate * t + phase)
    a = A_MIN + (1 - A_MIN) * s
    tone = np.sin(2 * np.pi * carrier * t) + 0.5 * np.sin(4 * np.pi * carrier * t)
    return Waveform(AMPLITUDE * a * tone, SAMPLE_RATE)


def render_face(points, img_size, palette):
    """
    Flat-shaded frame (H x W x 3 in [0, 1]) of a pixel-space landmark face.

    Parameters
    ----------
    points : ndarray
        Pixel-space face (68 x 2).
    img_size : int
        Frame side.
    palette : dict
        RGB colors for skin, lip, feature, mouth and background.

    Returns
    -------
    img : ndarray
        Rendered frame.
    """

    shift = 4

    def pts(arr):
        return np.round(np.asarray(arr) * (1 << shift)).astype(np.int32).reshape(-1, 1, 2)

    def col(name):
        return tuple(int(round(255 * c)) for c in palette[name])

    img = np.zeros((img_size, img_size, 3), dtype=np.uint8)
    img[:] = col('background')

    # Face outline: jaw plus a forehead arc over the brows
    jaw = points[0:17]
    cx = (jaw[0, 0] + jaw[16, 0]) / 2
    rx = (jaw[16, 0] - jaw[0, 0]) / 2
    top = jaw[0, 1] - 1.25 * rx
    t = np.linspace(0, np.pi, 17)[1:-1]
    arc = np.stack([cx + rx * np.cos(t), jaw[16, 1] - (jaw[16, 1] - top) * np.sin(t)], axis=1)
    cv2.fillPoly(img, [pts(np.vstack([jaw, arc]))], col('skin'), cv2.LINE_AA, shift)

    for a, b in ((17, 22), (22, 27)):
        cv2.polylines(img, [pts(points[a:b])], False, col('feature'), 2, cv2.LINE_AA, shift)
    cv2.polylines(img, [pts(points[27:31])], False, col('feature'), 1, cv2.LINE_AA, shift)
    cv2.polylines(img, [pts(points[31:36])], False, col('feature'), 1, cv2.LINE_AA, shift)
    for a, b in ((36, 42), (42, 48)):
        cv2.fillPoly(img, [pts(points[a:b])], col('feature'), cv2.LINE_AA, shift)
    cv2.fillPoly(img, [pts(points[48:60])], col('lip'), cv2.LINE_AA, shift)
    cv2.fillPoly(img, [pts(points[60:68])], col('mouth'), cv2.LINE_AA, shift)

    return img.astype(np.float64) / 255.


def video_palette(spec, rng):
    skin = np.clip(np.asarray(spec.skin_rgb) + rng.uniform(-spec.skin_jitter, spec.skin_jitter, 3), 0, 1)
    return {'skin': tuple(skin), 'lip': spec.lip_rgb, 'feature': spec.feature_rgb, 'mouth': spec.mouth_rgb,
            'background': spec.background_rgb}


def split_videos(n_videos, rng, train_frac=0.8):
    """
    Disjoint train/test assignment by video.
    """

    n_train = int(round(train_frac * n_videos))
    split = np.array(['test'] * n_videos, dtype=object)
    split[rng.permutation(n_videos)[:n_train]] = 'train'
    return split


def generate_video(spec, idx, emotion, out_dir):
    """
    Writes one video (audio.wav, landmarks.jsonl and frames/NNNNNN.png) and returns its number of frames.
    """

    rng = default_rng([spec.seed, idx])
    w = synth_audio(spec.seconds_per_video, emotion, rng)
    offset = tuple(rng.uniform(-spec.jitter_px, spec.jitter_px, 2))
    palette = video_palette(spec, rng)
    template = identity_face(rng, spec.shape_jitter)
    frames = oracle_landmarks(w, emotion, spec.img_size, offset, template)

    os.makedirs(os.path.join(out_dir, 'frames'), exist_ok=True)
    save_wav(w, os.path.join(out_dir, 'audio.wav'))
    save_landmarks(frames, os.path.join(out_dir, 'landmarks.jsonl'), spec.img_size, spec.img_size)
    for i, f in enumerate(frames):
        write_frame(render_face(f.points, spec.img_size, palette), os.path.join(out_dir, 'frames', '{0:06d}.png'.format(i)))

    return len(frames)


def generate_corpus(spec, out_dir, verbose=False):
    """
    Generates a synthetic corpus.

    Each video gets an amplitude-modulated tone whose carrier encodes the emotion, the closed-form landmark sequence
    driven by the tone's envelope, and flat-shaded frames of that sequence. Videos are split 8:2 into train and test.
    A `manifest.json` describing every video is written to `out_dir`.

    Parameters
    ----------
    spec : SynthSpec
        Corpus settings.
    out_dir : str
        Output directory, created if needed.
    verbose : bool
        Whether to show progress.

    Returns
    -------
    manifest : DataFrame
        One row per video with id, emotion, label, split, n_frames and relative paths.
    """

    os.makedirs(out_dir, exist_ok=True)
    split = split_videos(spec.n_videos, default_rng(spec.seed))

    if verbose:
        print('Generating {0} videos of {1}s in {2}'.format(spec.n_videos, spec.seconds_per_video, out_dir))

    rows = []
    for idx in tqdm(range(spec.n_videos), disable=not verbose):
        vid = 'vid{0:03d}'.format(idx)
        emotion = spec.emotion_set[idx % len(spec.emotion_set)]
        n_frames = generate_video(spec, idx, emotion, os.path.join(out_dir, vid))
        rows.append({
            'id': vid,
            'emotion': emotion,
            'label': EMOTIONS.index(emotion),
            'split': split[idx],
            'n_frames': n_frames,
            'audio': '{0}/audio.wav'.format(vid),
            'landmarks': '{0}/landmarks.jsonl'.format(vid),
            'frames': '{0}/frames'.format(vid),
            'reference': 0,
        })

    manifest = {'fps': FPS, 'img_size': spec.img_size, 'emotions': list(EMOTIONS),
                'spec': {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(spec).items()},
                'videos': rows}
    with open(os.path.join(out_dir, 'manifest.json'), 'w') as fh:
        json.dump(manifest, fh, indent=2)

    return pd.DataFrame(rows)
