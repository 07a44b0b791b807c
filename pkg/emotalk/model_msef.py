"""
Memory-sharing emotional feature extractor.
Code to lift per-frame MFCC blocks to emotion features through two shared memory units and classify them.
"""

import torch
import torch.nn as nn


N_EMOTIONS = 8
PROB_EPS = 1e-7


class AudioFeatureEncoder(nn.Module):
    """
    Two-layer perceptron mapping one aligned MFCC block to the 128-d feature f.
    """

    def __init__(self, in_dim, out_dim=128, hidden_dim=256):
        super().__init__()
        self.in_dim = in_dim
        self.fc1 = nn.Linear(in_dim, hidden_dim)
        self.fc2 = nn.Linear(hidden_dim, out_dim)

    def forward(self, x):
        if x.shape[-1] != self.in_dim:
            raise ValueError('Audio block has {0} features, encoder expects {1}.'.format(x.shape[-1], self.in_dim))
        return self.fc2(torch.relu(self.fc1(x)))


def encode_audio_feature(block, encoder):
    """
    Lifts aligned MFCC blocks (... x W*C array or tensor) to features f.
    """

    return encoder(torch.as_tensor(block, dtype=encoder.fc1.weight.dtype))


def memory_forward(f, M1, M2, g1, g2):
    """
    Residual read from two shared memories: f + g2(softmax(g1(f) M1) M2).

    Parameters
    ----------
    f : Tensor
        Features of shape (..., d).
    M1 : Tensor
        Query memory (d_q x m).
    M2 : Tensor
        Value memory (m x d).
    g1 : nn.Conv1d
        Kernel-size-1 convolution mapping d to d_q.
    g2 : nn.Conv1d
        Kernel-size-1 convolution mapping d to d.

    Returns
    -------
    f_e : Tensor
        Refined features with the shape of `f`.
    """

    shape = f.shape
    flat = f.reshape(-1, shape[-1])

    q = g1(flat.unsqueeze(-1)).squeeze(-1)
    scores = q @ M1
    if not torch.isfinite(scores).all():
        raise FloatingPointError('Memory scores contain nan or inf values.')

    read = torch.softmax(scores, dim=-1) @ M2
    out = g2(read.unsqueeze(-1)).squeeze(-1)

    return f + out.reshape(shape)


class MemorySharing(nn.Module):
    """
    Memory bank (M1, M2) with the two kernel-size-1 convolutions g1 and g2.

    g2 starts at zero so the module is the identity mapping at initialization.
    """

    def __init__(self, dim=128, query_dim=64, n_slots=64):
        super().__init__()
        self.g1 = nn.Conv1d(dim, query_dim, kernel_size=1)
        self.M1 = nn.Parameter(torch.randn(query_dim, n_slots) / query_dim ** 0.5)
        self.M2 = nn.Parameter(torch.randn(n_slots, dim) / n_slots ** 0.5)
        self.g2 = nn.Conv1d(dim, dim, kernel_size=1)
        nn.init.zeros_(self.g2.weight)
        nn.init.zeros_(self.g2.bias)

    def slot_weights(self, f):
        q = self.g1(f.reshape(-1, f.shape[-1]).unsqueeze(-1)).squeeze(-1)
        return torch.softmax(q @ self.M1, dim=-1)

    def forward(self, f):
        return memory_forward(f, self.M1, self.M2, self.g1, self.g2)


class EmotionClassifier(nn.Module):
    """
    Linear head with per-class sigmoid.
    """

    def __init__(self, dim=128, n_classes=N_EMOTIONS):
        super().__init__()
        self.fc = nn.Linear(dim, n_classes)

    def forward(self, f_e):
        return torch.sigmoid(self.fc(f_e))


def classify_emotion(f_e, head):
    """
    Per-class emotion probabilities in (0, 1).
    """

    if f_e.shape[-1] != head.fc.in_features:
        raise ValueError('Emotion feature has dim {0}, classifier expects {1}.'.format(
            f_e.shape[-1], head.fc.in_features))
    return head(f_e)


def check_one_hot(labels):
    ok = torch.all((labels == 0) | (labels == 1)) and torch.all(labels.sum(dim=-1) == 1)
    if not ok:
        raise ValueError('Emotion labels must be one-hot vectors (exactly one 1 per row, zeros elsewhere).')


def emotion_loss(probs, labels):
    """
    Per-class binary cross-entropy averaged over classes and samples.

    Parameters
    ----------
    probs : Tensor
        Predicted probabilities (..., 8). Clamped to [1e-7, 1 - 1e-7] before the logs.
    labels : Tensor
        One-hot emotion labels with the shape of `probs`.

    Returns
    -------
    loss : Tensor
        Scalar loss.
    """

    if probs.shape != labels.shape:
        raise ValueError('probs {0} and labels {1} must have the same shape.'.format(
            tuple(probs.shape), tuple(labels.shape)))
    check_one_hot(labels)

    p = probs.clamp(PROB_EPS, 1 - PROB_EPS)
    y = labels.to(p.dtype)
    return -(y * torch.log(p) + (1 - y) * torch.log(1 - p)).mean()


def emotion_accuracy(probs, labels):
    """
    Fraction of samples whose most probable class matches the label.
    """

    pred = probs.reshape(-1, probs.shape[-1]).argmax(dim=-1)
    true = labels.reshape(-1, labels.shape[-1]).argmax(dim=-1)
    return (pred == true).double().mean().item()


class MSEF(nn.Module):
    """
    Encoder, memory-sharing unit and emotion classifier.

    Parameters
    ----------
    in_dim : int
        Size of one aligned MFCC block (W*C).
    dim : int
        Emotion feature size.
    query_dim : int
        Memory query size d_q.
    n_slots : int
        Number of memory slots m.
    """

    def __init__(self, in_dim, dim=128, query_dim=64, n_slots=64, n_classes=N_EMOTIONS):
        super().__init__()
        self.encoder = AudioFeatureEncoder(in_dim, dim)
        self.memory = MemorySharing(dim, query_dim, n_slots)
        self.classifier = EmotionClassifier(dim, n_classes)

    def forward(self, x):
        f = encode_audio_feature(x, self.encoder)
        f_e = self.memory(f)
        return f, f_e, classify_emotion(f_e, self.classifier)
