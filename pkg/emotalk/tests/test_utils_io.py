import os
import pytest
import numpy as np
import torch
from ..audio import MfccSequence
from ..landmarks import PcaBasis
from ..utils_io import MFCC_MAGIC, CKPT_MAGIC, save_mfcc, load_mfcc, Checkpoint, save_checkpoint, load_checkpoint
from ..utils_io import write_frame, read_frame, list_frames


def test_mfcc_cache(tmp_path):
    path = str(tmp_path / 'a.mfcc')
    coeffs = np.random.default_rng(0).normal(size=(98, 13)).astype(np.float32)
    save_mfcc(MfccSequence(coeffs), path)
    with open(path, 'rb') as fh:
        assert fh.read(len(MFCC_MAGIC)) == MFCC_MAGIC
    assert os.path.getsize(path) == len(MFCC_MAGIC) + 9 + 4 * 98 * 13

    m = load_mfcc(path)
    assert m.coeffs.dtype == np.float32
    assert np.array_equal(m.coeffs, coeffs)


def test_mfcc_cache_errors(tmp_path):
    path = str(tmp_path / 'bad.mfcc')
    with open(path, 'wb') as fh:
        fh.write(b'NOT-AN-MFCC-FILE')
    with pytest.raises(ValueError):
        load_mfcc(path)

    save_mfcc(MfccSequence(np.zeros((4, 13), dtype=np.float32)), path)
    with open(path, 'rb') as fh:
        buf = fh.read()
    with open(path, 'wb') as fh:
        fh.write(buf[:-4])
    with pytest.raises(ValueError):
        load_mfcc(path)

    with pytest.raises(FileNotFoundError):
        load_mfcc(str(tmp_path / 'missing.mfcc'))


def test_checkpoint(tmp_path):
    path = str(tmp_path / 'model.ckpt')
    torch.manual_seed(0)
    tensors = {
        'audio2lm.lstm.weight_ih_l0': torch.randn(8, 5),
        'audio2lm.head.bias': torch.randn(3),
        'msef.memory.M1': torch.randn(4, 4),
        'optim.0.step': torch.tensor(12.),
        'aatu.scalar': torch.tensor(3.5, dtype=torch.float64),
        'counts': torch.arange(5),
    }
    rng = np.random.default_rng(1)
    pca = PcaBasis(rng.normal(size=136), rng.normal(size=(4, 136)), np.array([4., 3., 2., 1.]))
    ckpt = Checkpoint({'lr': 1e-4, 'stage': 'landmarks'}, tensors, pca, {'epoch': 2, 'step': 12})
    save_checkpoint(ckpt, path)
    with open(path, 'rb') as fh:
        assert fh.read(len(CKPT_MAGIC)) == CKPT_MAGIC

    loaded = load_checkpoint(path)
    assert loaded.config == ckpt.config
    assert loaded.meta == ckpt.meta
    assert set(loaded.tensors) == set(tensors)
    for k, v in tensors.items():
        assert loaded.tensors[k].dtype == v.dtype
        assert loaded.tensors[k].shape == v.shape
        assert torch.equal(loaded.tensors[k], v)
    assert np.array_equal(loaded.pca.mean, pca.mean)
    assert np.array_equal(loaded.pca.components, pca.components)
    assert np.array_equal(loaded.pca.explained_variance, pca.explained_variance)

    # Saving again gives the same bytes
    again = str(tmp_path / 'again.ckpt')
    save_checkpoint(loaded, again)
    with open(path, 'rb') as a, open(again, 'rb') as b:
        assert a.read() == b.read()

    assert set(loaded.state_dict('audio2lm')) == {'lstm.weight_ih_l0', 'head.bias'}
    assert set(loaded.state_dict('msef')) == {'memory.M1'}


def test_checkpoint_errors(tmp_path):
    path = str(tmp_path / 'bad.ckpt')
    with open(path, 'wb') as fh:
        fh.write(b'EMOTK-MFCC' + b'\x00' * 20)
    with pytest.raises(ValueError):
        load_checkpoint(path)
    with pytest.raises(FileNotFoundError):
        load_checkpoint(str(tmp_path / 'missing.ckpt'))
    with pytest.raises(ValueError):
        save_checkpoint(Checkpoint(tensors={'x': torch.zeros(2, dtype=torch.int8)}), path)


def test_frames(tmp_path):
    frame_dir = tmp_path / 'frames'
    frame_dir.mkdir()
    img = np.zeros((16, 16, 3))
    img[..., 0] = 1.
    img[4:8, 4:8, 2] = 0.5
    write_frame(img, str(frame_dir / '000001.png'))
    write_frame(np.ones((16, 16, 3)), str(frame_dir / '000000.png'))
    (frame_dir / 'notes.txt').write_text('x')

    assert list_frames(str(frame_dir)) == ['000000.png', '000001.png']
    back = read_frame(str(frame_dir / '000001.png'))
    assert back.shape == (16, 16, 3)
    assert np.all(back[..., 0] == 1.)
    assert abs(back[5, 5, 2] - 128 / 255) < 1e-12

    with pytest.raises(ValueError):
        write_frame(np.zeros((16, 16)), str(frame_dir / 'bad.png'))
    with pytest.raises(FileNotFoundError):
        read_frame(str(frame_dir / 'missing.png'))
    with pytest.raises(FileNotFoundError):
        list_frames(str(tmp_path / 'nothing'))
