__version__ = '0.1.0'  # noqa: F401
__version_info__ = tuple([int(num) for num in __version__.split('.')])  # noqa: F401

from .audio import Waveform, MfccSequence, FrameAlignedAudio, load_wav, save_wav, extract_mfcc, align_to_video  # noqa: F401
from .landmarks import LandmarkFrame, PcaBasis, PcaCoeffs, normalize, denormalize, lip_subset, fit_pca  # noqa: F401
from .landmarks import project, reconstruct, rasterize, save_landmarks, load_landmarks  # noqa: F401
from .model_msef import MSEF, MemorySharing, EmotionClassifier, encode_audio_feature, memory_forward, classify_emotion  # noqa: F401
from .model_msef import emotion_loss, emotion_accuracy  # noqa: F401
from .model_audio2lm import Audio2Lm, LossWeights, Stage1Inputs, Stage1Output, JointLoss  # noqa: F401
from .model_audio2lm import encode_landmarks, encode_mfcc, predict_sequence, combine_losses, joint_loss  # noqa: F401
from .model_attention import ChannelAttention, SpatialAttention, CBAM, channel_attention, spatial_attention, cbam  # noqa: F401
from .model_aatu import AATU, PerceptualExtractor, make_translator_input, unet_forward  # noqa: F401
from .model_aatu import l1_loss, perceptual_loss, stage2_loss  # noqa: F401
from .metrics import lmd, ssim, psnr, NOT_APPLICABLE  # noqa: F401
from .synth import EMOTIONS, SynthSpec, generate_corpus, oracle_landmarks, synth_audio, render_face  # noqa: F401
from .pre import VideoSample, read_manifest, load_corpus  # noqa: F401
from .utils import set_seed, get_toy_data  # noqa: F401
from .utils_io import Checkpoint, save_checkpoint, load_checkpoint, save_mfcc, load_mfcc  # noqa: F401
from .config import TrainConfig, load_config  # noqa: F401
from .train import train_stage1, train_stage2, load_stage1, load_stage2  # noqa: F401
from .infer import infer  # noqa: F401
from .evaluate import evaluate_run, MetricsReport  # noqa: F401
