import json
import os
import pytest
import pandas as pd
from ..cli import get_parser, main


SMALL = dict(lm_dim=16, audio_code_dim=8, emotion_dim=8, query_dim=4, n_slots=4, lstm_hidden=16, k_pca=4,
             img_size=32, unet_widths=[8, 8, 16, 16, 16], cbam_reduction=4, lr=1e-3, batch_size=2, epochs=1,
             perceptual_weight=0.)


def test_parser():
    parser = get_parser()
    args = parser.parse_args(['train', '--stage', 'landmarks', '--data', 'd', '--out', 'm.ckpt', '--max-steps', '3'])
    assert args.max_steps == 3
    assert args.ckpt_lm is None
    assert not args.verbose
    with pytest.raises(SystemExit):
        parser.parse_args(['train', '--stage', 'video', '--data', 'd', '--out', 'm.ckpt'])
    with pytest.raises(SystemExit):
        parser.parse_args([])


def test_pipeline(tmp_path, capsys):
    spec = str(tmp_path / 'spec.json')
    with open(spec, 'w') as fh:
        json.dump({'n_videos': 5, 'seconds_per_video': 0.4, 'img_size': 32, 'seed': 2}, fh)
    config = str(tmp_path / 'config.json')
    with open(config, 'w') as fh:
        json.dump(SMALL, fh)
    data = str(tmp_path / 'data')

    assert main(['synth-data', '--spec', spec, '--out', data]) == 0
    assert 'Wrote 5 videos (4 train, 1 test)' in capsys.readouterr().out

    lm = str(tmp_path / 'ckpt' / 'lm.ckpt')
    assert main(['train', '--stage', 'landmarks', '--config', config, '--data', data, '--out', lm]) == 0
    assert os.path.isfile(lm)
    curve = pd.read_csv(str(tmp_path / 'ckpt' / 'lm.curve.csv'))
    assert curve.shape[0] == 2

    render = str(tmp_path / 'ckpt' / 'render.ckpt')
    assert main(['train', '--stage', 'render', '--config', config, '--data', data, '--out', render,
                 '--max-steps', '1']) == 0
    assert pd.read_csv(str(tmp_path / 'ckpt' / 'render.curve.csv')).shape[0] == 1

    with open(os.path.join(data, 'manifest.json')) as fh:
        vid = [v for v in json.load(fh)['videos'] if v['split'] == 'test'][0]['id']
    gt = os.path.join(data, vid)
    out = str(tmp_path / 'out')
    assert main(['infer', '--audio', os.path.join(gt, 'audio.wav'), '--ref-image', os.path.join(gt, 'frames', '000000.png'),
                 '--ref-landmarks', os.path.join(gt, 'landmarks.jsonl'), '--ckpt-lm', lm, '--ckpt-render', render,
                 '--out', out]) == 0
    assert 'Wrote 9 frames at 25 fps' in capsys.readouterr().out

    report = str(tmp_path / 'report.json')
    assert main(['eval', '--pred', out, '--gt', gt, '--report', report]) == 0
    with open(report) as fh:
        d = json.load(fh)
    assert set(d['aggregate']) == {'f_lmd', 'm_lmd', 'ssim', 'psnr'}
    assert d['aggregate']['f_lmd'] > 0.


def test_errors(tmp_path, capsys):
    assert main(['eval', '--pred', str(tmp_path / 'a'), '--gt', str(tmp_path / 'b')]) == 1
    assert 'error' in capsys.readouterr().err

    config = str(tmp_path / 'config.json')
    with open(config, 'w') as fh:
        json.dump({'learning_rate': 1.}, fh)
    assert main(['train', '--stage', 'landmarks', '--config', config, '--data', str(tmp_path), '--out',
                 str(tmp_path / 'm.ckpt')]) == 1

    with open(config, 'w') as fh:
        json.dump(SMALL, fh)
    assert main(['train', '--stage', 'landmarks', '--config', config, '--data', str(tmp_path), '--out',
                 str(tmp_path / 'm.ckpt')]) == 1
    assert 'manifest.json' in capsys.readouterr().err
