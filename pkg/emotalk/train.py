"""
Training.
Functions to train the landmark model (stage one) and the frame translator (stage two) and to restore them from
checkpoints.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
import torch
from numpy.random import default_rng
from tqdm import tqdm

from ._misc import describe_tensor, log_traceback
from .config import TrainConfig
from .landmarks import LandmarkFrame, fit_pca, rasterize
from .model_aatu import AATU, PerceptualExtractor, make_translator_input, stage2_loss, to_chw
from .model_audio2lm import Audio2Lm, Stage1Output, joint_loss
from .model_msef import emotion_accuracy
from .pre import crop_batch, feature_stats, load_corpus
from .synth import EMOTIONS
from .utils import set_seed
from .utils_io import Checkpoint, load_checkpoint


# Model state prefix -> checkpoint key prefix. The catch-all prefix goes last.
STATE_GROUPS = {
    'landmarks': (('msef.', 'msef.'), ('', 'audio2lm.')),
    'render': (('enc_att.', 'attention.enc_att.'), ('dec_att.', 'attention.dec_att.'), ('', 'aatu.')),
}


@dataclass
class LoopState:
    epoch: int = 0
    batch: int = 0
    step: int = 0


def pack_model(model, stage):
    out = {}
    for k, v in model.state_dict().items():
        for src, dst in STATE_GROUPS[stage]:
            if k.startswith(src):
                out[dst + k[len(src):]] = v.detach().clone()
                break
    return out


def unpack_model(ckpt, stage):
    out = {}
    for src, dst in STATE_GROUPS[stage]:
        out.update({src + k: v for k, v in ckpt.state_dict(dst[:-1]).items()})
    return out


def pack_optimizer(opt, sched):
    """
    Splits optimizer and scheduler state into tensor records and JSON metadata.
    """

    state = opt.state_dict()
    tensors, scalars = {}, {}
    for pid, pstate in state['state'].items():
        for name, v in pstate.items():
            if isinstance(v, torch.Tensor):
                tensors['optim.{0}.{1}'.format(pid, name)] = v.detach().clone()
            else:
                scalars['{0}.{1}'.format(pid, name)] = v
    sched_state = {k: v for k, v in sched.state_dict().items() if k != 'lr_lambdas'}
    return tensors, {'optim_groups': state['param_groups'], 'optim_scalars': scalars, 'scheduler': sched_state}


def unpack_optimizer(opt, sched, ckpt):
    state = {}
    for key, v in ckpt.tensors.items():
        if key.startswith('optim.'):
            _, pid, name = key.split('.', 2)
            state.setdefault(int(pid), {})[name] = v.clone()
    for key, v in ckpt.meta['optim_scalars'].items():
        pid, name = key.split('.', 1)
        state.setdefault(int(pid), {})[name] = v
    opt.load_state_dict({'state': state, 'param_groups': ckpt.meta['optim_groups']})
    sched_state = dict(ckpt.meta['scheduler'])
    sched_state['lr_lambdas'] = [None] * len(opt.param_groups)
    sched.load_state_dict(sched_state)


def make_optimizer(model, config):
    """
    Adam over the trainable parameters with lr(e) = lr * lr_decay^e per epoch.
    """

    params = [p for p in model.parameters() if p.requires_grad]
    opt = torch.optim.Adam(params, lr=config.lr)
    decay = config.lr_decay
    sched = torch.optim.lr_scheduler.LambdaLR(opt, lambda e: decay ** e)
    return opt, sched


def lr_at(config, epoch):
    return config.lr * config.lr_decay ** epoch


def fit(model, config, n_items, loss_fn, opt, sched, state=None, verbose=False):
    """
    Shared training loop.

    Items are shuffled per epoch with a generator seeded by (seed, epoch), so a run resumed from `state` sees the same
    batches as an uninterrupted one. Training stops after `config.epochs` epochs or `config.max_steps` steps.

    Parameters
    ----------
    model : nn.Module
        Model to train.
    config : TrainConfig
        Training settings.
    n_items : int
        Number of training items.
    loss_fn : callable
        Maps an array of item indices to (loss tensor, dict of float components).
    opt, sched
        Optimizer and learning-rate scheduler.
    state : LoopState, None
        Position to resume from.
    verbose : bool
        Whether to show progress.

    Returns
    -------
    curve : DataFrame
        One row per step with epoch, step, lr and the loss components.
    state : LoopState
        Position reached.
    """

    state = state or LoopState()
    rows = []
    bs = config.batch_size
    epoch = state.epoch
    while epoch < config.epochs:
        order = default_rng([config.seed, epoch]).permutation(n_items)
        batches = [order[i:i + bs] for i in range(0, n_items, bs)]
        start = state.batch if epoch == state.epoch else 0
        model.train()
        for b in tqdm(range(start, len(batches)), disable=not verbose, desc='epoch {0}'.format(epoch)):
            loss, parts = loss_fn(batches[b])
            if not torch.isfinite(loss):
                log_traceback('Non-finite training loss, aborting', epoch=epoch, step=state.step,
                              loss=describe_tensor(loss), **parts)
                raise FloatingPointError("""Training loss became {0} at epoch {1}, step {2}. Lower the learning rate or
                check the inputs for non-finite values.""".format(loss.item(), epoch, state.step))
            opt.zero_grad()
            loss.backward()
            opt.step()
            state.step += 1
            rows.append({'epoch': epoch, 'step': state.step, 'lr': opt.param_groups[0]['lr'], **parts})

            if config.max_steps is not None and state.step >= config.max_steps:
                if b + 1 < len(batches):
                    state.epoch, state.batch = epoch, b + 1
                    return pd.DataFrame(rows), state
                break

        sched.step()
        if verbose and rows:
            ep = [r['total'] for r in rows if r['epoch'] == epoch]
            if ep:
                print('Epoch {0}: mean loss {1:.6g}, lr {2:.3g}'.format(epoch, np.mean(ep), lr_at(config, epoch)))
        epoch += 1
        state.epoch, state.batch = epoch, 0
        if config.max_steps is not None and state.step >= config.max_steps:
            break

    return pd.DataFrame(rows), state


def get_samples(corpus, config, verbose=False):
    if isinstance(corpus, str):
        return load_corpus(corpus, 'train', config.max_samples, config.n_mfcc, config.fps, config.num_workers, verbose)
    samples = list(corpus)
    if config.max_samples is not None:
        samples = samples[:config.max_samples]
    if len(samples) == 0:
        raise ValueError('Training corpus is empty.')
    return samples


def as_checkpoint(resume):
    if resume is None or isinstance(resume, Checkpoint):
        return resume
    return load_checkpoint(resume)


def fit_shape_model(samples, k, verbose=False):
    """
    PCA basis over every training frame. k is lowered to the corpus rank if needed.
    """

    X = np.concatenate([s.shapes for s in samples])
    rank = np.linalg.matrix_rank(X - X.mean(axis=0))
    if k > rank:
        warnings.warn('k_pca={0} exceeds the rank of the training landmarks ({1}), using k={1}.'.format(k, rank))
        k = int(rank)
    if verbose:
        print('Fitting PCA with k={0} on {1} frames'.format(k, X.shape[0]))
    return fit_pca([LandmarkFrame.from_flat(x, 'normalized') for x in X], k)


def build_audio2lm(config, audio_dim, pca):
    return Audio2Lm(audio_dim, pca.mean, pca.components, lm_dim=config.lm_dim, audio_code_dim=config.audio_code_dim,
                    emotion_dim=config.emotion_dim, query_dim=config.query_dim, n_slots=config.n_slots,
                    hidden_dim=config.lstm_hidden, use_msef=config.use_msef)


def build_translator(config):
    return AATU(4, 3, config.unet_widths, config.cbam_reduction, config.use_cbam)


def build_extractor(config):
    if config.perceptual_weight == 0:
        return None
    return PerceptualExtractor(layers=config.perceptual_layers, pretrained=config.pretrained_vgg)


def stage1_loss(model, samples, idx, weights):
    """
    Joint loss of a batch of videos. Returns the loss tensor and its float components, with the classifier accuracy.
    """

    audio, shapes, refs, labels = crop_batch([samples[i] for i in idx])
    shapes_t = torch.as_tensor(shapes, dtype=torch.float32)
    pca_t = (shapes_t - model.pca_mean) @ model.pca_components.T
    out = model(torch.as_tensor(refs, dtype=torch.float32), torch.as_tensor(audio, dtype=torch.float32))

    labels_t = torch.as_tensor(labels, dtype=torch.float32)
    probs = out.emotion_probs
    loss = joint_loss(out, Stage1Output(pca_t, shapes_t), probs, labels_t if probs is not None else None, weights)
    parts = loss.as_dict()
    parts['accuracy'] = emotion_accuracy(probs.detach(), labels_t) if probs is not None else np.nan
    return loss.total, parts


def train_stage1(config, corpus, resume=None, verbose=False):
    """
    Trains the landmark model.

    The PCA basis and the audio feature statistics are fit on the training videos, then MSEF, both encoders, the LSTM
    and its head are optimized under L_joint with Adam and per-epoch exponential learning-rate decay.

    Parameters
    ----------
    config : TrainConfig
        Training settings.
    corpus : str, list
        Corpus directory (its train split is used) or a list of VideoSample.
    resume : Checkpoint, str, None
        Stage-one checkpoint to continue from.
    verbose : bool
        Whether to show progress.

    Returns
    -------
    ckpt : Checkpoint
        Model, PCA basis, optimizer state and loop position.
    curve : DataFrame
        Per-step loss components (total, pca, landmark, lip, ec), accuracy and learning rate.
    """

    samples = get_samples(corpus, config, verbose)
    resume = as_checkpoint(resume)
    set_seed(config.seed, config.deterministic)

    audio_dim = samples[0].audio.shape[1]
    if any(s.audio.shape[1] != audio_dim for s in samples):
        raise ValueError('All videos must share the same aligned audio dimension.')

    if resume is not None:
        pca = resume.pca
        model = build_audio2lm(config, audio_dim, pca)
        model.load_state_dict(unpack_model(resume, 'landmarks'))
    else:
        pca = fit_shape_model(samples, config.k_pca, verbose)
        model = build_audio2lm(config, audio_dim, pca)
        model.set_feature_stats(*feature_stats(samples))

    opt, sched = make_optimizer(model, config)
    state = LoopState()
    if resume is not None:
        unpack_optimizer(opt, sched, resume)
        state = LoopState(**{k: resume.meta[k] for k in ('epoch', 'batch', 'step')})

    if verbose:
        print('Running stage 1 on {0} videos for {1} epochs'.format(len(samples), config.epochs))

    weights = config.loss_weights
    curve, state = fit(model, config, len(samples), lambda idx: stage1_loss(model, samples, idx, weights),
                       opt, sched, state, verbose)

    return make_checkpoint(model, opt, sched, config, 'landmarks', state, pca,
                           audio_dim=audio_dim, emotions=list(EMOTIONS)), curve


def make_checkpoint(model, opt, sched, config, stage, state, pca=None, **meta):
    tensors = pack_model(model, stage)
    opt_tensors, opt_meta = pack_optimizer(opt, sched)
    tensors.update(opt_tensors)
    meta.update(opt_meta)
    meta.update({'stage': stage, 'epoch': state.epoch, 'batch': state.batch, 'step': state.step})
    return Checkpoint(config.to_dict(), tensors, pca, meta)


def load_stage1(ckpt):
    """
    Rebuilds the landmark model of a stage-one checkpoint in evaluation mode.
    """

    ckpt = as_checkpoint(ckpt)
    if ckpt.meta.get('stage') != 'landmarks':
        raise ValueError('Checkpoint holds a {0} model, a landmarks checkpoint is required.'.format(ckpt.meta.get('stage')))
    config = TrainConfig.from_dict(ckpt.config)
    model = build_audio2lm(config, ckpt.meta['audio_dim'], ckpt.pca)
    model.load_state_dict(unpack_model(ckpt, 'landmarks'))
    return model.eval()


def load_stage2(ckpt):
    """
    Rebuilds the translator of a stage-two checkpoint in evaluation mode.
    """

    ckpt = as_checkpoint(ckpt)
    if ckpt.meta.get('stage') != 'render':
        raise ValueError('Checkpoint holds a {0} model, a render checkpoint is required.'.format(ckpt.meta.get('stage')))
    model = build_translator(TrainConfig.from_dict(ckpt.config))
    model.load_state_dict(unpack_model(ckpt, 'render'))
    return model.eval()


@torch.no_grad()
def predict_shapes(model, sample):
    """
    Stage-one prediction of a whole video (V x 136 normalized shapes).
    """

    ref = torch.as_tensor(sample.ref_shape, dtype=torch.float32).unsqueeze(0)
    audio = torch.as_tensor(sample.audio, dtype=torch.float32).unsqueeze(0)
    return model(ref, audio).landmark_seq[0].double().numpy()


def make_pairs(samples, max_pairs=None):
    pairs = [(i, j) for i, s in enumerate(samples) for j in range(s.n_frames)]
    if max_pairs is not None:
        pairs = pairs[:max_pairs]
    return pairs


def stage2_batch(samples, pairs, img_size, predicted=None):
    """
    Translator inputs and targets of a batch of (video, frame) pairs.

    Parameters
    ----------
    samples : list of VideoSample
        Videos.
    pairs : list
        (video index, frame index) tuples.
    img_size : int
        Frame side.
    predicted : list, None
        Stage-one shapes per video. If None, sketches come from ground-truth landmarks.

    Returns
    -------
    x : Tensor
        B x 4 x H x W translator inputs.
    target : Tensor
        B x 3 x H x W real frames.
    """

    sketches, refs, targets = [], [], []
    for i, j in pairs:
        s = samples[i]
        shape = s.shapes[j] if predicted is None else predicted[i][j]
        sketches.append(rasterize(LandmarkFrame.from_flat(shape, 'normalized'), img_size))
        refs.append(to_chw(s.ref_image))
        targets.append(to_chw(s.frame(j)))
    target = torch.stack(targets)
    if target.shape[-1] != img_size or target.shape[-2] != img_size:
        raise ValueError('Frames are {0}x{1} but img_size is {2}.'.format(target.shape[-2], target.shape[-1], img_size))
    x = make_translator_input(torch.as_tensor(np.stack(sketches), dtype=torch.float32), torch.stack(refs))
    return x, target


def train_stage2(config, corpus, stage1_ckpt=None, resume=None, verbose=False):
    """
    Trains the frame translator.

    Every (video, frame) pair is an item: the input stacks the landmark sketch of that frame with the video's
    reference frame, the target is the real frame. The loss is L1 + perceptual_weight * L_per.

    Parameters
    ----------
    config : TrainConfig
        Training settings.
    corpus : str, list
        Corpus directory (its train split is used) or a list of VideoSample.
    stage1_ckpt : Checkpoint, str, None
        Stage-one checkpoint, required when `config.teacher_forcing` is False.
    resume : Checkpoint, str, None
        Stage-two checkpoint to continue from.
    verbose : bool
        Whether to show progress.

    Returns
    -------
    ckpt : Checkpoint
        Translator, optimizer state and loop position.
    curve : DataFrame
        Per-step loss components (total, l1, perceptual) and learning rate.
    """

    samples = get_samples(corpus, config, verbose)
    resume = as_checkpoint(resume)

    predicted = None
    if not config.teacher_forcing:
        if stage1_ckpt is None:
            raise ValueError('teacher_forcing=False needs a stage-one checkpoint to draw predicted landmarks.')
        lm_model = load_stage1(stage1_ckpt)
        predicted = [predict_shapes(lm_model, s) for s in samples]

    set_seed(config.seed, config.deterministic)
    model = build_translator(config)
    extractor = build_extractor(config)
    if resume is not None:
        model.load_state_dict(unpack_model(resume, 'render'))

    opt, sched = make_optimizer(model, config)
    state = LoopState()
    if resume is not None:
        unpack_optimizer(opt, sched, resume)
        state = LoopState(**{k: resume.meta[k] for k in ('epoch', 'batch', 'step')})

    pairs = make_pairs(samples, config.max_pairs)
    if verbose:
        print('Running stage 2 on {0} frame pairs for {1} epochs'.format(len(pairs), config.epochs))

    def loss_fn(idx):
        x, target = stage2_batch(samples, [pairs[k] for k in idx], config.img_size, predicted)
        total, l1, per = stage2_loss(model(x), target, extractor, config.perceptual_weight)
        return total, {'total': total.item(), 'l1': l1.item(), 'perceptual': per.item()}

    curve, state = fit(model, config, len(pairs), loss_fn, opt, sched, state, verbose)

    return make_checkpoint(model, opt, sched, config, 'render', state), curve
