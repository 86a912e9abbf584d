"""
Volumes and their on-disk formats

``.cfv`` layout: 8-byte magic, little-endian u32 D, H, W, u8 contrast tag,
u8 alignment flag, three little-endian f64 rigid parameters, then D*H*W
little-endian f64 voxels in row-major order.
"""
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from contrastforge.constants import (
    ALIGNMENT_FLAGS, ALIGNMENT_NAMES, CONTRAST_NAMES, CONTRAST_TAGS, MISALIGNED, REGISTERED, VOLUME_MAGIC,
    VOLUME_SUFFIX)
from contrastforge.exceptions import DataError, FileFormatError, UsageError
from contrastforge.utils import atomic_write

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

_HEADER = struct.Struct('<8sIIIBB3d')
_PGM_MAX = 65535


@dataclass(frozen=True)
class Alignment:
    """
    Registered, misaligned or resampled; ``params`` is (rotation degrees, shift rows, shift columns)
    """
    flag: str = REGISTERED
    params: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.flag not in ALIGNMENT_FLAGS:
            raise UsageError("Unknown alignment flag {0}".format(self.flag))
        object.__setattr__(self, 'params', tuple(float(v) for v in self.params))


@dataclass
class Volume:
    data: np.ndarray
    contrast: str
    alignment: Alignment = field(default_factory=Alignment)
    subject: int = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise DataError("A volume needs three dimensions, got shape {0}".format(self.data.shape))
        if self.contrast not in CONTRAST_TAGS:
            raise UsageError("Unknown contrast {0}".format(self.contrast))

    @property
    def dims(self):
        return self.data.shape

    @property
    def mask(self):
        """
        Nonzero support
        """
        return self.data != 0

    def with_data(self, data, alignment=None):
        return Volume(data, self.contrast, self.alignment if alignment is None else alignment, self.subject)


def volume_filename(subject, contrast, misaligned=False):
    return 'subject_{0:04d}_{1}{2}{3}'.format(subject, contrast, '_' + MISALIGNED if misaligned else '', VOLUME_SUFFIX)


def encode_volume(volume):
    depth, height, width = volume.dims
    header = _HEADER.pack(VOLUME_MAGIC, depth, height, width, CONTRAST_TAGS[volume.contrast],
                          ALIGNMENT_FLAGS[volume.alignment.flag], *volume.alignment.params)
    return header + np.ascontiguousarray(volume.data, dtype='<f8').tobytes()


def write_volume(path, volume):
    atomic_write(path, encode_volume(volume))
    log.debug("wrote volume %s %s", path, volume.dims)


def read_volume(path, subject=None):
    path = Path(path)
    payload = path.read_bytes()
    if len(payload) < _HEADER.size:
        raise FileFormatError(path, "truncated header")
    magic, depth, height, width, tag, flag, *params = _HEADER.unpack_from(payload)
    if magic != VOLUME_MAGIC:
        raise FileFormatError(path, "bad magic {0!r}".format(magic))
    if tag not in CONTRAST_NAMES:
        raise FileFormatError(path, "unknown contrast tag {0}".format(tag))
    if flag not in ALIGNMENT_NAMES:
        raise FileFormatError(path, "unknown alignment flag {0}".format(flag))
    expected = _HEADER.size + 8 * depth * height * width
    if len(payload) != expected:
        raise FileFormatError(path, "expected {0} bytes, found {1}".format(expected, len(payload)))
    data = np.frombuffer(payload, dtype='<f8', offset=_HEADER.size).reshape(depth, height, width)
    return Volume(data.astype(np.float64), CONTRAST_NAMES[tag], Alignment(ALIGNMENT_NAMES[flag], params), subject)


def write_pgm(path, image):
    """
    16-bit binary PGM; values in [0, 1] map to [0, 65535]
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise UsageError("PGM export needs a 2-d image, got shape {0}".format(image.shape))
    height, width = image.shape
    pixels = np.rint(np.clip(image, 0.0, 1.0) * _PGM_MAX).astype('>u2')
    header = 'P5\n{0} {1}\n{2}\n'.format(width, height, _PGM_MAX).encode('ascii')
    atomic_write(path, header + pixels.tobytes())


def read_pgm(path):
    path = Path(path)
    payload = path.read_bytes()
    parts = payload.split(maxsplit=4)
    if len(parts) < 4 or parts[0] != b'P5':
        raise FileFormatError(path, "not a binary PGM")
    try:
        width, height, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    except ValueError as e:
        raise FileFormatError(path, "malformed PGM header", e)
    if len(payload) < 2 * width * height + len(parts[0]) + 3:
        raise FileFormatError(path, "truncated PGM")
    pixels = np.frombuffer(payload[-2 * width * height:], dtype='>u2').reshape(height, width)
    return pixels.astype(np.float64) / maxval
