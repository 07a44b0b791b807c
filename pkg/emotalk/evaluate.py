"""
Evaluation of generated runs.
Functions to compare predicted and ground-truth video directories and write a metrics report.
"""

import json
import os
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from tqdm import tqdm

from .landmarks import LandmarkFrame, load_landmarks, normalization_params
from .metrics import NotApplicable, lmd, psnr, ssim
from .utils_io import list_frames, read_frame


METRICS = ('f_lmd', 'm_lmd', 'ssim', 'psnr')


@dataclass
class MetricsReport:
    """
    Per-video and aggregate F-LMD, M-LMD, SSIM and PSNR.

    `per_video` is indexed by video id with one column per metric plus `n_frames`. PSNR is NaN where it is not
    applicable (identical frames) and written as "N/A".
    """

    per_video: pd.DataFrame
    aggregate: dict

    def to_dict(self):

        def fmt(v):
            return 'N/A' if v is None or isinstance(v, NotApplicable) or (isinstance(v, float) and np.isnan(v)) else v

        per_video = {vid: {m: fmt(float(row[m])) for m in METRICS} for vid, row in self.per_video.iterrows()}
        for vid, row in self.per_video.iterrows():
            per_video[vid]['n_frames'] = int(row['n_frames'])
        return {'per_video': per_video, 'aggregate': {m: fmt(self.aggregate[m]) for m in METRICS}}

    def to_json(self, path):
        with open(path, 'w') as fh:
            json.dump(self.to_dict(), fh, indent=2)


def find_videos(run_dir):
    """
    Maps video ids to directories holding `landmarks.jsonl` and `frames/`.

    A directory that holds these itself is a single video named after the directory.
    """

    if not os.path.isdir(run_dir):
        raise FileNotFoundError('Run directory {0} not found.'.format(run_dir))

    def is_video(d):
        return os.path.isfile(os.path.join(d, 'landmarks.jsonl')) and os.path.isdir(os.path.join(d, 'frames'))

    if is_video(run_dir):
        return {os.path.basename(os.path.normpath(run_dir)): run_dir}
    return {d: os.path.join(run_dir, d) for d in sorted(os.listdir(run_dir)) if is_video(os.path.join(run_dir, d))}


def to_gt_space(pred, gt):
    """
    Normalizes both frames with the ground-truth frame's centroid and inter-ocular distance.
    """

    centroid, scale = normalization_params(gt)
    return ((pred.points - centroid) / scale), ((gt.points - centroid) / scale)


def evaluate_video(pred_dir, gt_dir):
    """
    Metrics of one predicted video against its ground truth.

    Returns
    -------
    row : dict
        f_lmd, m_lmd, mean SSIM, mean PSNR over frames where it is defined (NaN if none), and n_frames.
    """

    pred_lm, _ = load_landmarks(os.path.join(pred_dir, 'landmarks.jsonl'))
    gt_lm, _ = load_landmarks(os.path.join(gt_dir, 'landmarks.jsonl'))
    pred_fr = list_frames(os.path.join(pred_dir, 'frames'))
    gt_fr = list_frames(os.path.join(gt_dir, 'frames'))
    if len(pred_lm) != len(gt_lm) or len(pred_fr) != len(gt_fr):
        raise ValueError("""Frame counts differ between {0} ({1} landmarks, {2} frames) and {3} ({4} landmarks, {5}
        frames).""".format(pred_dir, len(pred_lm), len(pred_fr), gt_dir, len(gt_lm), len(gt_fr)))

    pairs = [to_gt_space(p, g) for p, g in zip(pred_lm, gt_lm)]
    pred_n = [LandmarkFrame(p, 'normalized') for p, _ in pairs]
    gt_n = [LandmarkFrame(g, 'normalized') for _, g in pairs]

    ssims, psnrs = [], []
    for p, g in zip(pred_fr, gt_fr):
        a = read_frame(os.path.join(pred_dir, 'frames', p))
        b = read_frame(os.path.join(gt_dir, 'frames', g))
        ssims.append(ssim(a, b))
        v = psnr(a, b)
        if not isinstance(v, NotApplicable):
            psnrs.append(v)

    return {
        'f_lmd': lmd(pred_n, gt_n, 'full'),
        'm_lmd': lmd(pred_n, gt_n, 'lips'),
        'ssim': float(np.mean(ssims)) if ssims else np.nan,
        'psnr': float(np.mean(psnrs)) if psnrs else np.nan,
        'n_frames': len(pred_lm),
    }


def evaluate_run(pred_dir, gt_dir, report_path=None, verbose=False):
    """
    Evaluates a generated run against ground truth.

    Videos are matched by directory name. Videos present on one side only are skipped with a warning. Aggregates are
    means over videos, PSNR over the videos where it is defined.

    Parameters
    ----------
    pred_dir : str
        Directory of predicted videos (or a single predicted video).
    gt_dir : str
        Directory of ground-truth videos (or a single video).
    report_path : str, None
        If given, the report is written there as JSON.
    verbose : bool
        Whether to show progress.

    Returns
    -------
    report : MetricsReport
        Per-video and aggregate metrics.
    """

    pred, gt = find_videos(pred_dir), find_videos(gt_dir)
    if len(pred) == 1 and len(gt) == 1:
        common = [(next(iter(pred)), next(iter(gt)))]
    else:
        names = sorted(set(pred) & set(gt))
        common = [(n, n) for n in names]
        extra = sorted(set(pred) ^ set(gt))
        if extra:
            warnings.warn('Videos {0} are missing on one side and are skipped.'.format(extra))
    if len(common) == 0:
        raise ValueError('No videos in common between {0} and {1}.'.format(pred_dir, gt_dir))

    if verbose:
        print('Evaluating {0} videos'.format(len(common)))

    rows = {gname: evaluate_video(pred[pname], gt[gname]) for pname, gname in tqdm(common, disable=not verbose)}
    per_video = pd.DataFrame.from_dict(rows, orient='index')
    per_video.index.name = 'video'

    psnr_vals = per_video['psnr'].dropna()
    aggregate = {
        'f_lmd': float(per_video['f_lmd'].mean()),
        'm_lmd': float(per_video['m_lmd'].mean()),
        'ssim': float(per_video['ssim'].mean()),
        'psnr': float(psnr_vals.mean()) if psnr_vals.size > 0 else np.nan,
    }

    report = MetricsReport(per_video, aggregate)
    if report_path is not None:
        report.to_json(report_path)
    return report
