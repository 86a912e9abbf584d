"""
Binary training checkpoints

Layout, all integers little-endian u32: magic ``CFCKPT01``, version, config
hash, config text, epoch, RNG state (JSON), blob count, then per blob its
name, rank, dims and little-endian f64 values. Strings are length-prefixed
UTF-8.
"""
import io
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from contrastforge.config import config_hash, dump_config, parse_config_text
from contrastforge.constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from contrastforge.exceptions import ConfigurationError, FileFormatError
from contrastforge.networks import ParamSet
from contrastforge.optim import AdamState
from contrastforge.tensor import Tensor
from contrastforge.utils import atomic_write

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

_U32 = struct.Struct('<I')


@dataclass
class Checkpoint:
    """
    Everything needed to continue or use a run: parameter sets and Adam states
    keyed by network name, the shuffle RNG state and the resolved config
    """
    epoch: int
    config: object
    params: dict = field(default_factory=dict)
    adam: dict = field(default_factory=dict)
    rng_state: dict = None

    @property
    def config_hash(self):
        return config_hash(self.config)


def _put_bytes(out, payload):
    out.write(_U32.pack(len(payload)))
    out.write(payload)


def _put_str(out, text):
    _put_bytes(out, text.encode('utf-8'))


def _put_array(out, name, array):
    array = np.asarray(array, dtype='<f8')
    _put_str(out, name)
    out.write(_U32.pack(array.ndim))
    for n in array.shape:
        out.write(_U32.pack(n))
    out.write(np.ascontiguousarray(array).tobytes())


def _blobs(ckpt):
    for net, params in ckpt.params.items():
        for name, tensor in params.items():
            yield 'params/{0}/{1}'.format(net, name), tensor.data
    for net, state in ckpt.adam.items():
        yield 'adam/{0}/t'.format(net), np.array(float(state.t))
        for name in sorted(state.m):
            yield 'adam/{0}/m/{1}'.format(net, name), state.m[name]
            yield 'adam/{0}/v/{1}'.format(net, name), state.v[name]


def encode_checkpoint(ckpt):
    out = io.BytesIO()
    out.write(CHECKPOINT_MAGIC)
    out.write(_U32.pack(CHECKPOINT_VERSION))
    _put_str(out, ckpt.config_hash)
    _put_str(out, dump_config(ckpt.config))
    out.write(_U32.pack(ckpt.epoch))
    _put_str(out, json.dumps(ckpt.rng_state, sort_keys=True))
    blobs = list(_blobs(ckpt))
    out.write(_U32.pack(len(blobs)))
    for name, array in blobs:
        _put_array(out, name, array)
    return out.getvalue()


def write_checkpoint(path, ckpt):
    atomic_write(path, encode_checkpoint(ckpt))
    log.info("checkpoint for epoch %s written to %s", ckpt.epoch, path)


class _Reader(object):

    def __init__(self, path, payload):
        self.path = path
        self.payload = payload
        self.offset = 0

    def take(self, n):
        if self.offset + n > len(self.payload):
            raise FileFormatError(self.path, "truncated at byte {0}".format(self.offset))
        chunk = self.payload[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def u32(self):
        return _U32.unpack(self.take(4))[0]

    def text(self):
        try:
            return self.take(self.u32()).decode('utf-8')
        except UnicodeDecodeError as e:
            raise FileFormatError(self.path, "invalid text field", e)

    def array(self):
        name = self.text()
        shape = tuple(self.u32() for _ in range(self.u32()))
        count = int(np.prod(shape)) if shape else 1
        values = np.frombuffer(self.take(8 * count), dtype='<f8').reshape(shape)
        return name, values.astype(np.float64)


def read_checkpoint(path):
    path = Path(path)
    reader = _Reader(path, path.read_bytes())
    magic = reader.take(len(CHECKPOINT_MAGIC))
    if magic != CHECKPOINT_MAGIC:
        raise FileFormatError(path, "bad magic {0!r}".format(magic))
    version = reader.u32()
    if version != CHECKPOINT_VERSION:
        raise FileFormatError(path, "unsupported checkpoint version {0}".format(version))
    stored_hash = reader.text()
    try:
        cfg = parse_config_text(reader.text(), source=str(path))
    except ConfigurationError as e:
        raise FileFormatError(path, "embedded config is invalid", e)
    if config_hash(cfg) != stored_hash:
        raise FileFormatError(path, "config hash does not match the embedded config")
    epoch = reader.u32()
    try:
        rng_state = json.loads(reader.text())
    except ValueError as e:
        raise FileFormatError(path, "invalid RNG state", e)

    params, moments, steps = {}, {}, {}
    for _ in range(reader.u32()):
        name, values = reader.array()
        parts = name.split('/', 3)
        if parts[0] == 'params' and len(parts) == 3:
            params.setdefault(parts[1], ParamSet())[parts[2]] = Tensor(values, requires_grad=True)
        elif parts[0] == 'adam' and len(parts) == 3 and parts[2] == 't':
            steps[parts[1]] = int(values)
        elif parts[0] == 'adam' and len(parts) == 4 and parts[2] in ('m', 'v'):
            moments.setdefault(parts[1], {'m': {}, 'v': {}})[parts[2]][parts[3]] = values
        else:
            raise FileFormatError(path, "unknown blob {0}".format(name))
    if reader.offset != len(reader.payload):
        raise FileFormatError(path, "trailing bytes after the last blob")

    adam = {net: AdamState(m=moments.get(net, {}).get('m', {}), v=moments.get(net, {}).get('v', {}), t=t)
            for net, t in steps.items()}
    return Checkpoint(epoch=epoch, config=cfg, params=params, adam=adam, rng_state=rng_state)
