"""
Utility functions for file formats.
Functions to read and write MFCC caches, checkpoints and PNG frames.
"""

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np
import torch

import cv2

from .audio import MfccSequence
from .landmarks import PcaBasis


MFCC_MAGIC = b'EMOTK-MFCC'
CKPT_MAGIC = b'EMOTK-CKPT'
FORMAT_VERSION = 1

DTYPES = {
    'float32': (torch.float32, np.float32),
    'float64': (torch.float64, np.float64),
    'int64': (torch.int64, np.int64),
}


def save_mfcc(m, path):
    """
    Writes an MFCC matrix as "EMOTK-MFCC", a version byte, uint32 T and C, then row-major float32 values.
    """

    coeffs = np.ascontiguousarray(m.coeffs, dtype='<f4')
    with open(path, 'wb') as fh:
        fh.write(MFCC_MAGIC)
        fh.write(struct.pack('<BII', FORMAT_VERSION, coeffs.shape[0], coeffs.shape[1]))
        fh.write(coeffs.tobytes())


def load_mfcc(path):
    """
    Reads an MFCC cache written by `save_mfcc`.
    """

    if not os.path.isfile(path):
        raise FileNotFoundError('MFCC cache {0} not found.'.format(path))
    with open(path, 'rb') as fh:
        buf = fh.read()
    if not buf.startswith(MFCC_MAGIC):
        raise ValueError('{0} is not an MFCC cache (bad magic).'.format(path))
    off = len(MFCC_MAGIC)
    version, T, C = struct.unpack_from('<BII', buf, off)
    if version != FORMAT_VERSION:
        raise ValueError('Unsupported MFCC cache version {0} in {1}.'.format(version, path))
    off += struct.calcsize('<BII')
    if len(buf) - off != 4 * T * C:
        raise ValueError('MFCC cache {0} is truncated: expected {1} values.'.format(path, T * C))
    coeffs = np.frombuffer(buf, dtype='<f4', offset=off).reshape(T, C).astype(np.float32)
    return MfccSequence(coeffs)


@dataclass
class Checkpoint:
    """
    Versioned model container.

    Attributes
    ----------
    config : dict
        Snapshot of the training configuration.
    tensors : dict
        Named tensors, e.g. model parameters under `audio2lm.*` or `aatu.*`.
    pca : PcaBasis, None
        Landmark shape model of stage one.
    meta : dict
        Free-form JSON metadata, e.g. epoch, step and stage.
    """

    config: dict = field(default_factory=dict)
    tensors: dict = field(default_factory=dict)
    pca: PcaBasis = None
    meta: dict = field(default_factory=dict)

    def state_dict(self, prefix):
        n = len(prefix) + 1
        return {k[n:]: v for k, v in self.tensors.items() if k.startswith(prefix + '.')}


def save_checkpoint(ckpt, path):
    """
    Writes a checkpoint.

    The layout is "EMOTK-CKPT", a version byte, a uint32 header length, a JSON header holding the config, metadata and
    a tensor index (name, dtype, shape, byte offset), then the raw little-endian tensor data. The PCA basis is stored
    as three float64 records under `pca.*`.

    Parameters
    ----------
    ckpt : Checkpoint
        Checkpoint to write.
    path : str
        Output path.
    """

    tensors = dict(ckpt.tensors)
    if ckpt.pca is not None:
        tensors['pca.mean'] = torch.as_tensor(ckpt.pca.mean, dtype=torch.float64)
        tensors['pca.components'] = torch.as_tensor(ckpt.pca.components, dtype=torch.float64)
        tensors['pca.explained_variance'] = torch.as_tensor(ckpt.pca.explained_variance, dtype=torch.float64)

    index, chunks, offset = [], [], 0
    for name in sorted(tensors):
        t = tensors[name].detach().cpu().contiguous()
        dtype = str(t.dtype).replace('torch.', '')
        if dtype not in DTYPES:
            raise ValueError('Tensor {0} has unsupported dtype {1}.'.format(name, dtype))
        data = t.numpy().astype(np.dtype(DTYPES[dtype][1]).newbyteorder('<'), copy=False).tobytes()
        index.append({'name': name, 'dtype': dtype, 'shape': list(t.shape), 'offset': offset})
        chunks.append(data)
        offset += len(data)

    header = json.dumps({'config': ckpt.config, 'meta': ckpt.meta, 'tensors': index}, sort_keys=True).encode()
    with open(path, 'wb') as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack('<BI', FORMAT_VERSION, len(header)))
        fh.write(header)
        for data in chunks:
            fh.write(data)


def load_checkpoint(path):
    """
    Reads a checkpoint written by `save_checkpoint`.

    Parameters
    ----------
    path : str
        Checkpoint path.

    Returns
    -------
    ckpt : Checkpoint
        Checkpoint with tensors bit-identical to the saved ones.
    """

    if not os.path.isfile(path):
        raise FileNotFoundError('Checkpoint {0} not found.'.format(path))
    with open(path, 'rb') as fh:
        buf = fh.read()
    if not buf.startswith(CKPT_MAGIC):
        raise ValueError('{0} is not an emotalk checkpoint (bad magic).'.format(path))
    off = len(CKPT_MAGIC)
    version, hlen = struct.unpack_from('<BI', buf, off)
    if version != FORMAT_VERSION:
        raise ValueError('Unsupported checkpoint version {0} in {1}.'.format(version, path))
    off += struct.calcsize('<BI')
    header = json.loads(buf[off:off + hlen].decode())
    off += hlen

    tensors = {}
    for rec in header['tensors']:
        _, ndtype = DTYPES[rec['dtype']]
        n = int(np.prod(rec['shape'], dtype=np.int64))
        start = off + rec['offset']
        arr = np.frombuffer(buf, dtype=np.dtype(ndtype).newbyteorder('<'), count=n, offset=start)
        tensors[rec['name']] = torch.from_numpy(arr.astype(ndtype).reshape(rec['shape']))

    pca = None
    if 'pca.mean' in tensors:
        pca = PcaBasis(tensors.pop('pca.mean').numpy(), tensors.pop('pca.components').numpy(),
                       tensors.pop('pca.explained_variance').numpy())

    return Checkpoint(header['config'], tensors, pca, header['meta'])


def write_frame(img, path):
    """
    Writes an RGB image with values in [0, 1] (H x W x 3) as an 8-bit PNG.
    """

    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError('Frame must be H x W x 3, got {0}.'.format(img.shape))
    u8 = np.round(np.clip(img, 0, 1) * 255).astype(np.uint8)
    if not cv2.imwrite(path, cv2.cvtColor(u8, cv2.COLOR_RGB2BGR)):
        raise OSError('Could not write frame {0}.'.format(path))


def read_frame(path):
    """
    Reads a PNG frame as an RGB float image in [0, 1] (H x W x 3).
    """

    if not os.path.isfile(path):
        raise FileNotFoundError('Frame {0} not found.'.format(path))
    img = cv2.imread(path, cv2.IMREAD_COLOR)
    if img is None:
        raise ValueError('Could not decode image {0}.'.format(path))
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB).astype(np.float64) / 255.


def list_frames(frame_dir):
    """
    Sorted PNG file names in a frame directory.
    """

    if not os.path.isdir(frame_dir):
        raise FileNotFoundError('Frame directory {0} not found.'.format(frame_dir))
    return sorted(f for f in os.listdir(frame_dir) if f.endswith('.png'))
