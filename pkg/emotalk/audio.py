"""
Audio features.
Functions to decode audio, compute MFCC features and align them to video frames.
"""

import os
import warnings
from dataclasses import dataclass
from math import gcd

import numpy as np
from scipy.fft import dct
from scipy.signal import get_window, resample_poly

import soundfile as sf


SAMPLE_RATE = 16000
WINDOW_MS = 25
HOP_MS = 10
N_FFT = 512
LOG_FLOOR = 1e-10
PCM_SUBTYPES = ('PCM_S8', 'PCM_U8', 'PCM_16', 'PCM_24', 'PCM_32', 'FLOAT', 'DOUBLE')


@dataclass(frozen=True)
class Waveform:
    """
    Mono audio signal with samples in [-1, 1].
    """

    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError('Waveform samples must be a non-empty 1-d array, got shape {0}.'.format(samples.shape))
        object.__setattr__(self, 'samples', samples)

    @property
    def num_samples(self):
        return self.samples.size

    @property
    def duration(self):
        return self.num_samples / self.sample_rate_hz


@dataclass(frozen=True)
class MfccSequence:
    """
    Per-window cepstral coefficients (T x C).
    """

    coeffs: np.ndarray
    window_ms: int = WINDOW_MS
    hop_ms: int = HOP_MS

    @property
    def n_windows(self):
        return self.coeffs.shape[0]

    @property
    def n_mfcc(self):
        return self.coeffs.shape[1]


@dataclass(frozen=True)
class FrameAlignedAudio:
    """
    MFCC windows grouped into contiguous blocks, one block per video frame (V x W*C).
    """

    per_video_frame: np.ndarray
    fps: int
    windows_per_frame: int
    n_mfcc: int

    @property
    def n_frames(self):
        return self.per_video_frame.shape[0]

    @property
    def is_empty(self):
        return self.n_frames == 0

    @property
    def dim(self):
        return self.windows_per_frame * self.n_mfcc


def resample(samples, sr_in, sr_out=SAMPLE_RATE):
    """
    Polyphase resampling from `sr_in` to `sr_out`.
    """

    if sr_in == sr_out:
        return np.asarray(samples, dtype=np.float64)
    g = gcd(int(sr_in), int(sr_out))
    return resample_poly(samples, int(sr_out) // g, int(sr_in) // g)


def load_wav(path):
    """
    Reads a WAV file as a 16 kHz mono waveform.

    Multi-channel audio is averaged into one channel and any sample rate is resampled to 16 kHz.

    Parameters
    ----------
    path : str
        Path to a PCM (8/16/24/32 bit) or float WAV file.

    Returns
    -------
    w : Waveform
        Mono waveform at 16 kHz with samples in [-1, 1].
    """

    if not os.path.isfile(path):
        raise FileNotFoundError('Audio file {0} not found.'.format(path))
    try:
        info = sf.info(path)
    except RuntimeError as e:
        raise ValueError('Could not read audio file {0}: {1}'.format(path, e)) from e
    if info.format != 'WAV' or info.subtype not in PCM_SUBTYPES:
        raise ValueError("""Audio file {0} has format {1} with encoding {2}. Only PCM or float WAV files are supported,
        please convert it first.""".format(path, info.format, info.subtype))

    data, sr = sf.read(path, dtype='float64', always_2d=True)
    if data.shape[0] == 0:
        raise ValueError('Audio file {0} contains no samples.'.format(path))

    # Average channels and resample
    samples = resample(data.mean(axis=1), sr)

    return Waveform(np.clip(samples, -1.0, 1.0), SAMPLE_RATE)


def save_wav(w, path, subtype='PCM_16'):
    """
    Writes a waveform as a WAV file.
    """

    sf.write(path, np.clip(w.samples, -1.0, 1.0), w.sample_rate_hz, subtype=subtype, format='WAV')


def ms_to_samples(ms, sample_rate=SAMPLE_RATE):
    return int(round(ms * sample_rate / 1000))


def n_mfcc_windows(num_samples, sample_rate=SAMPLE_RATE, window_ms=WINDOW_MS, hop_ms=HOP_MS):
    """
    Number of analysis windows that fit in `num_samples` samples.
    """

    win, hop = ms_to_samples(window_ms, sample_rate), ms_to_samples(hop_ms, sample_rate)
    if num_samples < win:
        return 0
    return 1 + (num_samples - win) // hop


def windows_per_video_frame(fps, hop_ms=HOP_MS):
    if fps <= 0 or 1000 % (fps * hop_ms) != 0:
        raise ValueError("""Video frame duration 1000/{0} ms is not a multiple of the {1} ms hop. Use a frame rate that
        divides 1000/{1}, e.g. 25 fps.""".format(fps, hop_ms))
    return 1000 // (fps * hop_ms)


def n_video_frames(num_samples, fps=25, sample_rate=SAMPLE_RATE):
    """
    Number of video frames produced by `align_to_video` for `num_samples` audio samples.
    """

    return n_mfcc_windows(num_samples, sample_rate) // windows_per_video_frame(fps)


def mel_filterbank(n_filters=26, n_fft=N_FFT, sample_rate=SAMPLE_RATE, low_hz=0.0, high_hz=None):
    """
    Triangular filters evenly spaced on the mel scale (n_filters x n_fft//2+1).
    """

    high_hz = high_hz or sample_rate / 2
    if high_hz > sample_rate / 2:
        raise ValueError('high_hz={0} is above the Nyquist frequency {1}.'.format(high_hz, sample_rate / 2))

    low_mel = 2595 * np.log10(1 + low_hz / 700)
    high_mel = 2595 * np.log10(1 + high_hz / 700)
    hz = 700 * (10 ** (np.linspace(low_mel, high_mel, n_filters + 2) / 2595) - 1)
    bins = np.floor((n_fft + 1) * hz / sample_rate).astype(int)

    fb = np.zeros((n_filters, n_fft // 2 + 1))
    for j in range(n_filters):
        lo, mid, hi = bins[j], bins[j + 1], bins[j + 2]
        if mid > lo:
            fb[j, lo:mid] = (np.arange(lo, mid) - lo) / (mid - lo)
        if hi > mid:
            fb[j, mid:hi] = (hi - np.arange(mid, hi)) / (hi - mid)
    return fb


def frame_signal(samples, window, hop, preemph=0.97):
    """
    Pre-emphasis followed by slicing into overlapping windows (T x window).
    """

    y = np.append(samples[0], samples[1:] - preemph * samples[:-1])
    return np.lib.stride_tricks.sliding_window_view(y, window)[::hop]


def mel_energies(w, n_filters=26, preemph=0.97):
    """
    Mel filterbank energies per analysis window, before the log.

    Parameters
    ----------
    w : Waveform
        Input waveform at 16 kHz.
    n_filters : int
        Number of mel filters.
    preemph : float
        Pre-emphasis coefficient.

    Returns
    -------
    energies : ndarray
        Matrix of filterbank energies (T x n_filters).
    """

    win, hop = ms_to_samples(WINDOW_MS, w.sample_rate_hz), ms_to_samples(HOP_MS, w.sample_rate_hz)
    if w.sample_rate_hz != SAMPLE_RATE:
        raise ValueError('Waveform must be sampled at {0} Hz, got {1}. Use load_wav or resample.'.format(
            SAMPLE_RATE, w.sample_rate_hz))
    if w.num_samples < win:
        raise ValueError('Waveform has {0} samples, at least one {1}-sample window is required.'.format(
            w.num_samples, win))

    frames = frame_signal(w.samples, win, hop, preemph=preemph) * get_window('hann', win)
    pspec = np.abs(np.fft.rfft(frames, N_FFT)) ** 2 / N_FFT

    return pspec @ mel_filterbank(n_filters, N_FFT, w.sample_rate_hz).T


def extract_mfcc(w, n_mfcc=13, n_filters=26, preemph=0.97):
    """
    Mel-frequency cepstral coefficients with 25 ms windows and a 10 ms hop.

    The pipeline is pre-emphasis, Hann window, power spectrum, mel filterbank, log (energies floored at 1e-10) and an
    orthonormal type-II DCT keeping the first `n_mfcc` coefficients.

    Parameters
    ----------
    w : Waveform
        Input waveform at 16 kHz, at least 400 samples long.
    n_mfcc : int
        Number of cepstral coefficients to keep.
    n_filters : int
        Number of mel filters.
    preemph : float
        Pre-emphasis coefficient.

    Returns
    -------
    m : MfccSequence
        Coefficient matrix with 1 + (num_samples - 400) // 160 rows.
    """

    if not 0 < n_mfcc <= n_filters:
        raise ValueError('n_mfcc={0} must be between 1 and n_filters={1}.'.format(n_mfcc, n_filters))

    energies = mel_energies(w, n_filters=n_filters, preemph=preemph)
    coeffs = dct(np.log(np.maximum(energies, LOG_FLOOR)), type=2, axis=1, norm='ortho')[:, :n_mfcc]

    return MfccSequence(np.ascontiguousarray(coeffs), WINDOW_MS, HOP_MS)


def align_to_video(m, fps=25):
    """
    Groups MFCC windows into non-overlapping blocks, one per video frame.

    Parameters
    ----------
    m : MfccSequence
        Coefficients to align.
    fps : int
        Video frame rate. 1000/fps must be a multiple of the hop size.

    Returns
    -------
    a : FrameAlignedAudio
        Matrix of V x (W*C) where W = (1000/fps)/hop_ms. A trailing partial block is dropped.
    """

    w = windows_per_video_frame(fps, m.hop_ms)
    n_frames = m.n_windows // w
    if n_frames == 0:
        warnings.warn('Only {0} MFCC windows available, {1} are needed per video frame. Result is empty.'.format(
            m.n_windows, w))

    blocks = m.coeffs[:n_frames * w].reshape(n_frames, w * m.n_mfcc)

    return FrameAlignedAudio(blocks, fps, w, m.n_mfcc)


def frame_envelope(w, fps=25):
    """
    RMS amplitude of the audio block that starts each aligned video frame.
    """

    block = w.sample_rate_hz // fps
    n = n_video_frames(w.num_samples, fps, w.sample_rate_hz)
    x = w.samples[:n * block].reshape(n, block)
    return np.sqrt(np.mean(x ** 2, axis=1))
