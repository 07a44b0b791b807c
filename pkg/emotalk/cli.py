"""
Command line interface.
`emotalk synth-data`, `emotalk train`, `emotalk infer` and `emotalk eval`.
"""

import argparse
import logging
import os
import sys

from .config import load_config
from .evaluate import evaluate_run
from .infer import infer
from .synth import SynthSpec, generate_corpus
from .train import train_stage1, train_stage2
from .utils_io import save_checkpoint


def run_synth(args):
    spec = SynthSpec.from_json(args.spec) if args.spec is not None else SynthSpec()
    manifest = generate_corpus(spec, args.out, verbose=args.verbose)
    print('Wrote {0} videos ({1} train, {2} test) to {3}'.format(
        manifest.shape[0], (manifest['split'] == 'train').sum(), (manifest['split'] == 'test').sum(), args.out))


def run_train(args):
    overrides = {'stage': args.stage}
    if args.max_steps is not None:
        overrides['max_steps'] = args.max_steps
    config = load_config(args.config, **overrides)
    if config.stage == 'landmarks':
        ckpt, curve = train_stage1(config, args.data, resume=args.resume, verbose=args.verbose)
    else:
        ckpt, curve = train_stage2(config, args.data, stage1_ckpt=args.ckpt_lm, resume=args.resume,
                                   verbose=args.verbose)
    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    save_checkpoint(ckpt, args.out)
    curve.to_csv(os.path.splitext(args.out)[0] + '.curve.csv', index=False)
    if curve.shape[0] > 0:
        print('Trained {0} steps, final loss {1:.6g}, saved to {2}'.format(
            ckpt.meta['step'], curve['total'].iloc[-1], args.out))


def run_infer(args):
    index = infer(args.audio, args.ref_image, args.ref_landmarks, args.ckpt_lm, args.ckpt_render, args.out,
                  batch_size=args.batch_size, verbose=args.verbose)
    print('Wrote {0} frames at {1} fps to {2}'.format(index['n_frames'], index['fps'], args.out))


def run_eval(args):
    report = evaluate_run(args.pred, args.gt, args.report, verbose=args.verbose)
    agg = report.to_dict()['aggregate']
    print(' '.join('{0}={1}'.format(k, v if isinstance(v, str) else '{0:.4f}'.format(v)) for k, v in agg.items()))


def get_parser():
    parser = argparse.ArgumentParser(prog='emotalk', description='Emotional talking-head generation.')
    parser.add_argument('-v', '--verbose', action='store_true', help='Show progress.')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('synth-data', help='Generate a synthetic corpus.')
    p.add_argument('--spec', default=None, help='JSON file with SynthSpec keys.')
    p.add_argument('--out', required=True, help='Output corpus directory.')
    p.set_defaults(func=run_synth)

    p = sub.add_parser('train', help='Train the landmark model or the frame translator.')
    p.add_argument('--stage', choices=['landmarks', 'render'], required=True)
    p.add_argument('--config', default=None, help='JSON file with TrainConfig keys.')
    p.add_argument('--data', required=True, help='Corpus directory holding manifest.json.')
    p.add_argument('--out', required=True, help='Checkpoint path.')
    p.add_argument('--ckpt-lm', default=None, help='Stage-one checkpoint, used when teacher_forcing is false.')
    p.add_argument('--resume', default=None, help='Checkpoint to resume from.')
    p.add_argument('--max-steps', type=int, default=None)
    p.set_defaults(func=run_train)

    p = sub.add_parser('infer', help='Generate frames from audio and a reference face.')
    p.add_argument('--audio', required=True)
    p.add_argument('--ref-image', required=True)
    p.add_argument('--ref-landmarks', required=True)
    p.add_argument('--ckpt-lm', required=True)
    p.add_argument('--ckpt-render', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--batch-size', type=int, default=16)
    p.set_defaults(func=run_infer)

    p = sub.add_parser('eval', help='Compare generated videos with ground truth.')
    p.add_argument('--pred', required=True)
    p.add_argument('--gt', required=True)
    p.add_argument('--report', default=None, help='JSON report path.')
    p.set_defaults(func=run_eval)

    return parser


def main(argv=None):
    args = get_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except (ValueError, FileNotFoundError, FloatingPointError) as e:
        print('emotalk {0}: error: {1}'.format(args.command, e), file=sys.stderr)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
