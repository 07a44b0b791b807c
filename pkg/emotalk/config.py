"""
Training configuration.
TrainConfig dataclass and JSON config loading.
"""

import json
import os
from dataclasses import asdict, dataclass, fields
from typing import Optional

from typing_extensions import Literal

from .model_audio2lm import LossWeights


SEED_ENV = 'EMOTALK_SEED'


@dataclass
class TrainConfig:
    """
    Hyper-parameters of both training stages.

    Attributes
    ----------
    lr : float
        Adam learning rate.
    lr_decay : float
        Exponential learning-rate decay, applied once per epoch. With batch_size at least the number of training
        items every epoch is a single step, so the rate shrinks every step. Use 1.0 to overfit small corpora.
    batch_size : int
        Videos per batch.
    epochs : int
        Number of passes over the training videos.
    max_steps : int, None
        Stop after this many optimizer steps.
    seed : int
        Seed of model initialization and shuffling.
    alpha, beta, gamma : float
        Weights of L_landmark, L_lip and L_ec in L_joint.
    stage : str
        `landmarks` (stage one) or `render` (stage two).
    teacher_forcing : bool
        Stage two draws sketches from ground-truth landmarks if True, from stage-one predictions otherwise.
    use_msef, use_cbam : bool
        Ablation switches for the emotion extractor and the attention blocks.
    perceptual_weight : float
        Weight of the perceptual loss in stage two.
    perceptual_layers : list, None
        Extractor layers used by the perceptual loss. None uses all of them.
    pretrained_vgg : str, bool, None
        Path to VGG-19 weights, or True to fetch them through torchvision.
    max_samples : int, None
        Use at most this many training videos.
    max_pairs : int, None
        Stage two trains on at most this many (frame, target) pairs.
    num_workers : int
        Threads used to load videos. 0 loads sequentially.
    deterministic : bool
        Single-threaded deterministic mode.
    """

    lr: float = 1e-4
    lr_decay: float = 0.95
    batch_size: int = 16
    epochs: int = 100
    max_steps: Optional[int] = None
    seed: int = 0
    alpha: float = 10.0
    beta: float = 10.0
    gamma: float = 10.0
    stage: Literal['landmarks', 'render'] = 'landmarks'
    n_mfcc: int = 13
    fps: int = 25
    k_pca: int = 20
    lm_dim: int = 512
    audio_code_dim: int = 128
    emotion_dim: int = 128
    query_dim: int = 64
    n_slots: int = 64
    lstm_hidden: int = 256
    img_size: int = 128
    unet_widths: tuple = (32, 64, 128, 256, 512)
    cbam_reduction: int = 8
    teacher_forcing: bool = True
    use_msef: bool = True
    use_cbam: bool = True
    perceptual_weight: float = 1.0
    perceptual_layers: Optional[list] = None
    pretrained_vgg: Optional[str] = None
    max_samples: Optional[int] = None
    max_pairs: Optional[int] = None
    num_workers: int = 0
    deterministic: bool = True

    def __post_init__(self):
        self.unet_widths = tuple(self.unet_widths)
        if self.lr <= 0:
            raise ValueError('lr must be positive, got {0}.'.format(self.lr))
        if not 0 < self.lr_decay <= 1:
            raise ValueError('lr_decay must be in (0, 1], got {0}.'.format(self.lr_decay))
        if self.stage not in ('landmarks', 'render'):
            raise ValueError('stage must be landmarks or render, got {0}.'.format(self.stage))
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError('batch_size and epochs must be at least 1.')
        if self.perceptual_weight < 0:
            raise ValueError('perceptual_weight must be non-negative, got {0}.'.format(self.perceptual_weight))
        if min(self.alpha, self.beta, self.gamma) <= 0:
            raise ValueError('alpha, beta and gamma must be strictly positive.')

    @property
    def loss_weights(self):
        return LossWeights(self.alpha, self.beta, self.gamma)

    def to_dict(self):
        d = asdict(self)
        d['unet_widths'] = list(self.unet_widths)
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError('Unknown config keys: {0}. Valid keys are {1}.'.format(sorted(unknown), sorted(names)))
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        if not os.path.isfile(path):
            raise FileNotFoundError('Config file {0} not found.'.format(path))
        with open(path, 'r') as fh:
            return cls.from_dict(json.load(fh))

    def to_json(self, path):
        with open(path, 'w') as fh:
            json.dump(self.to_dict(), fh, indent=2)


def load_config(path=None, **overrides):
    """
    Builds a TrainConfig from a JSON file and keyword overrides.

    The environment variable EMOTALK_SEED, when set, overrides the seed.

    Parameters
    ----------
    path : str, None
        JSON file with TrainConfig keys. If None, defaults are used.
    overrides : dict
        Keys replacing the file values.

    Returns
    -------
    config : TrainConfig
        Validated configuration.
    """

    d = {}
    if path is not None:
        d = TrainConfig.from_json(path).to_dict()
    d.update(overrides)
    seed = os.environ.get(SEED_ENV)
    if seed is not None:
        try:
            d['seed'] = int(seed)
        except ValueError:
            raise ValueError('{0} must be an integer, got "{1}".'.format(SEED_ENV, seed))
    return TrainConfig.from_dict(d)
