"""
Audio to landmarks.
Code to predict landmark sequences from audio, a reference shape and emotion features, and to compute the joint loss.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
import torch.nn as nn

from .landmarks import LIP_COORDS, LandmarkFrame, N_POINTS
from .model_msef import MSEF, emotion_loss


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 10.0
    beta: float = 10.0
    gamma: float = 10.0

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) <= 0:
            raise ValueError('Loss weights must be strictly positive, got {0}.'.format(self))


@dataclass
class Stage1Inputs:
    """
    Reference shape (B x 136), aligned audio (B x V x W*C) and optional precomputed f_e (B x V x 128).
    """

    ref_landmarks: torch.Tensor
    audio: torch.Tensor
    emotion: Optional[torch.Tensor] = None

    def __post_init__(self):
        if self.audio.dim() == 2:
            self.audio = self.audio.unsqueeze(0)
        if self.ref_landmarks.dim() == 1:
            self.ref_landmarks = self.ref_landmarks.unsqueeze(0)
        if self.emotion is not None:
            if self.emotion.dim() == 2:
                self.emotion = self.emotion.unsqueeze(0)
            if self.emotion.shape[:2] != self.audio.shape[:2]:
                raise ValueError('Emotion features cover {0} frames but audio covers {1}.'.format(
                    self.emotion.shape[1], self.audio.shape[1]))


@dataclass
class Stage1Output:
    """
    PCA coefficients (B x V x k), reconstructed shapes (B x V x 136) and emotion probabilities (B x V x 8).
    """

    pca_seq: torch.Tensor
    landmark_seq: torch.Tensor
    emotion_probs: Optional[torch.Tensor] = None
    hidden: Optional[torch.Tensor] = None

    @property
    def n_frames(self):
        return self.pca_seq.shape[1]

    def frames(self, b=0):
        arr = self.landmark_seq[b].detach().cpu().double().numpy()
        return [LandmarkFrame.from_flat(row, 'normalized') for row in arr]


@dataclass
class JointLoss:
    total: torch.Tensor
    pca: torch.Tensor
    landmark: torch.Tensor
    lip: torch.Tensor
    ec: torch.Tensor

    def as_dict(self):
        return {k: float(getattr(self, k).detach()) for k in ('total', 'pca', 'landmark', 'lip', 'ec')}


class Perceptron(nn.Module):

    def __init__(self, in_dim, out_dim, hidden_dim=256):
        super().__init__()
        self.in_dim = in_dim
        self.fc1 = nn.Linear(in_dim, hidden_dim)
        self.fc2 = nn.Linear(hidden_dim, out_dim)

    def forward(self, x):
        if x.shape[-1] != self.in_dim:
            raise ValueError('{0} got {1} input features, expected {2}.'.format(
                type(self).__name__, x.shape[-1], self.in_dim))
        return self.fc2(torch.relu(self.fc1(x)))


class LandmarkEncoder(Perceptron):
    """
    E_Lm: flattened normalized reference shape (136-d) to a 512-d code.
    """

    def __init__(self, in_dim=2 * N_POINTS, out_dim=512, hidden_dim=256):
        super().__init__(in_dim, out_dim, hidden_dim)


class MfccEncoder(Perceptron):
    """
    E_A: one aligned MFCC block to a 128-d code.
    """

    def __init__(self, in_dim, out_dim=128, hidden_dim=256):
        super().__init__(in_dim, out_dim, hidden_dim)


def encode_landmarks(ref, encoder):
    """
    Encodes normalized reference landmarks (LandmarkFrame or ... x 136 tensor).
    """

    if isinstance(ref, LandmarkFrame):
        ref = torch.as_tensor(ref.flatten(), dtype=encoder.fc1.weight.dtype)
    return encoder(ref)


def encode_mfcc(block, encoder):
    """
    Encodes aligned MFCC blocks (... x W*C tensor).
    """

    return encoder(torch.as_tensor(block, dtype=encoder.fc1.weight.dtype))


class Audio2Lm(nn.Module):
    """
    Stage-one sequence model.

    The reference code from the landmark encoder is broadcast to every frame and concatenated with the MFCC code and the
    emotion feature f_e. A single-layer LSTM followed by a linear head emits k PCA coefficients per frame, which are
    mapped back to shapes through the fixed PCA basis.

    Parameters
    ----------
    audio_dim : int
        Size of one aligned MFCC block (W*C).
    pca_mean : array
        Mean shape of the PCA basis (136,).
    pca_components : array
        PCA components (k x 136).
    use_msef : bool
        If False, a zero emotion block is fed to the LSTM and no emotion is predicted.
    """

    def __init__(self, audio_dim, pca_mean, pca_components, lm_dim=512, audio_code_dim=128, emotion_dim=128,
                 query_dim=64, n_slots=64, hidden_dim=256, use_msef=True):
        super().__init__()
        k = np.asarray(pca_components).shape[0]
        self.use_msef = use_msef
        self.emotion_dim = emotion_dim
        self.lm_encoder = LandmarkEncoder(2 * N_POINTS, lm_dim)
        self.audio_encoder = MfccEncoder(audio_dim, audio_code_dim)
        self.msef = MSEF(audio_dim, emotion_dim, query_dim, n_slots)
        self.lstm = nn.LSTM(lm_dim + audio_code_dim + emotion_dim, hidden_dim, num_layers=1, batch_first=True)
        self.head = nn.Linear(hidden_dim, k)
        self.register_buffer('pca_mean', torch.as_tensor(np.asarray(pca_mean), dtype=torch.float32))
        self.register_buffer('pca_components', torch.as_tensor(np.asarray(pca_components), dtype=torch.float32))
        self.register_buffer('feat_mean', torch.zeros(audio_dim))
        self.register_buffer('feat_std', torch.ones(audio_dim))

    def set_feature_stats(self, mean, std):
        self.feat_mean.copy_(torch.as_tensor(mean, dtype=self.feat_mean.dtype))
        self.feat_std.copy_(torch.as_tensor(np.maximum(std, 1e-6), dtype=self.feat_std.dtype))

    def reconstruct(self, pca):
        return pca @ self.pca_components + self.pca_mean

    def forward(self, ref, audio, emotion=None):
        if audio.dim() != 3 or audio.shape[1] == 0:
            raise ValueError('Audio must be a non-empty (batch, frames, features) tensor, got {0}.'.format(
                tuple(audio.shape)))
        B, V, _ = audio.shape
        x = (audio - self.feat_mean) / self.feat_std

        lm = self.lm_encoder(ref).unsqueeze(1).expand(B, V, -1)
        a = self.audio_encoder(x)

        probs = None
        if emotion is None:
            if self.use_msef:
                _, emotion, probs = self.msef(x)
            else:
                emotion = x.new_zeros(B, V, self.emotion_dim)

        h, _ = self.lstm(torch.cat([lm, a, emotion], dim=-1))
        pca = self.head(h)

        return Stage1Output(pca, self.reconstruct(pca), probs, h)


def predict_sequence(model, inputs):
    """
    Runs stage one on a reference shape and an aligned audio sequence.

    Parameters
    ----------
    model : Audio2Lm
        Stage-one model.
    inputs : Stage1Inputs
        Reference landmarks, aligned audio and optional emotion features.

    Returns
    -------
    out : Stage1Output
        Per-frame PCA coefficients and reconstructed landmarks.
    """

    if inputs.audio.shape[1] == 0:
        raise ValueError('Cannot predict landmarks for an empty audio sequence.')
    return model(inputs.ref_landmarks, inputs.audio, inputs.emotion)


def combine_losses(c_pca, c_lm, c_lip, c_ec, weights=LossWeights()):
    """
    L_joint = L_pca + alpha * L_landmark + beta * L_lip + gamma * L_ec.
    """

    return c_pca + weights.alpha * c_lm + weights.beta * c_lip + weights.gamma * c_ec


def joint_loss(pred, truth, emo_probs=None, emo_labels=None, weights=LossWeights()):
    """
    Joint stage-one loss.

    Parameters
    ----------
    pred : Stage1Output
        Model prediction.
    truth : Stage1Output
        Ground truth PCA coefficients and shapes with the same sequence length.
    emo_probs : Tensor, None
        Predicted emotion probabilities. If None, L_ec is 0.
    emo_labels : Tensor, None
        One-hot labels matching `emo_probs`.
    weights : LossWeights
        Scaling factors alpha, beta and gamma.

    Returns
    -------
    loss : JointLoss
        Total loss and its four components. L_landmark and L_lip are mean squared errors over all (lip) coordinates
        and frames, L_pca over the coefficients.
    """

    if pred.pca_seq.shape != truth.pca_seq.shape or pred.landmark_seq.shape != truth.landmark_seq.shape:
        raise ValueError('Prediction {0} and ground truth {1} sequences differ in shape.'.format(
            tuple(pred.landmark_seq.shape), tuple(truth.landmark_seq.shape)))

    l_pca = torch.mean((pred.pca_seq - truth.pca_seq) ** 2)
    diff = pred.landmark_seq - truth.landmark_seq
    l_lm = torch.mean(diff ** 2)
    l_lip = torch.mean(diff[..., torch.as_tensor(LIP_COORDS, device=diff.device)] ** 2)
    if emo_probs is not None:
        if emo_labels is None:
            raise ValueError('emo_labels are required when emo_probs are given.')
        l_ec = emotion_loss(emo_probs, emo_labels)
    else:
        l_ec = torch.zeros((), dtype=l_pca.dtype, device=l_pca.device)

    return JointLoss(combine_losses(l_pca, l_lm, l_lip, l_ec, weights), l_pca, l_lm, l_lip, l_ec)
