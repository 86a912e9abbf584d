"""
Phantom datasets: generation, manifest, loading and slicing into training samples
"""
import configparser
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from contrastforge.constants import (
    CONTRASTS, DEFAULT_PROTOCOLS, MANIFEST_NAME, MAX_ROT_DEG, MAX_SHIFT_VOX, MODES, PGAN,
    PROTOCOL_PRESETS, T2, TEST_ROLE, TRAIN_ROLE, CONTRAST_TAGS)
from contrastforge.exceptions import ConfigurationError, DataError, FileFormatError
from contrastforge.phantom import (
    generate_phantom, misalign, normalize_volume, pooled_statistics, protocol_for, render_contrast,
    resample_round_trip)
from contrastforge.settings import resolve_threads
from contrastforge.utils import centered_pad_sizes
from contrastforge.volumes import read_volume, volume_filename, write_pgm, write_volume

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())


@dataclass
class SliceSample:
    """
    ``source`` is (k, S, S); ``target`` is (1, S, S) for pGAN and (k, S, S) for cGAN
    """
    source: np.ndarray
    target: np.ndarray
    center: int
    subject: int = None


def _stack(data, center, k):
    indices = np.clip(np.arange(center - k // 2, center + k // 2 + 1), 0, data.shape[0] - 1)
    return data[indices]


def _check_k(k):
    if k < 1 or k % 2 == 0:
        raise ConfigurationError("k must be a positive odd number, got {0}".format(k))


def pad_slices(slices, image_size):
    try:
        pads = centered_pad_sizes(slices.shape, image_size)
    except ValueError as e:
        raise DataError("Slices of {0} do not fit the configured image size".format(slices.shape), e)
    return np.pad(slices, pads, mode='constant')


def extract_slices(source, target, k, mode, image_size=None):
    """
    One sample per axial index. Stacks reaching past the volume repeat the border slice.
    """
    _check_k(k)
    if mode not in MODES:
        raise ConfigurationError("Unknown mode {0}".format(mode))
    if source.dims != target.dims:
        raise DataError("Source dims {0} differ from target dims {1}".format(source.dims, target.dims))
    depth, height, width = source.dims
    image_size = max(height, width) if image_size is None else image_size
    target_k = 1 if mode == PGAN else k
    samples = []
    for center in range(depth):
        samples.append(SliceSample(
            source=pad_slices(_stack(source.data, center, k), image_size),
            target=pad_slices(_stack(target.data, center, target_k), image_size),
            center=center,
            subject=source.subject))
    return samples


def source_stacks(source, k, image_size):
    """
    Padded (D, k, S, S) input stacks for synthesis
    """
    _check_k(k)
    return np.stack([pad_slices(_stack(source.data, center, k), image_size) for center in range(source.dims[0])])


def split_dataset(subjects, train_fraction, seed):
    """
    Subject-level split; returns sorted (train, test) id lists
    """
    subjects = list(subjects)
    if len(subjects) < 2:
        raise DataError("Need at least 2 subjects to split, got {0}".format(len(subjects)))
    if not 0 < train_fraction < 1:
        raise ConfigurationError("train_fraction must be in (0, 1), got {0}".format(train_fraction))
    n_train = min(max(int(round(len(subjects) * train_fraction)), 1), len(subjects) - 1)
    order = np.random.default_rng(seed).permutation(len(subjects))
    train = sorted(subjects[i] for i in order[:n_train])
    test = sorted(subjects[i] for i in order[n_train:])
    return train, test


def subject_seed(seed, subject):
    return seed * 10000 + subject


def task_label(source_contrast, target_contrast, resample_contrast=None):
    """
    e.g. ``T1\u2192T2*`` when the T2 volumes went through a registration resampling
    """
    def star(contrast):
        return contrast + ('*' if contrast == resample_contrast else '')
    return '{0}\u2192{1}'.format(star(source_contrast), star(target_contrast))


@dataclass
class DatasetManifest:
    seed: int
    size: tuple
    n_tissues: int = 5
    protocols: str = DEFAULT_PROTOCOLS
    noise: float = 0.0
    misaligned: bool = False
    misaligned_contrast: str = T2
    resample_contrast: str = None
    max_rot_deg: float = MAX_ROT_DEG
    max_shift_vox: float = MAX_SHIFT_VOX
    train_fraction: float = 0.8
    roles: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.size = tuple(int(n) for n in self.size)
        if self.protocols not in PROTOCOL_PRESETS:
            raise ConfigurationError("Unknown protocol preset {0}".format(self.protocols))
        if self.resample_contrast is not None and self.resample_contrast not in CONTRASTS:
            raise ConfigurationError("Unknown contrast {0}".format(self.resample_contrast))
        if self.misaligned_contrast not in CONTRASTS:
            raise ConfigurationError("Unknown contrast {0}".format(self.misaligned_contrast))
        if self.noise < 0:
            raise ConfigurationError("noise amplitude must be non-negative, got {0}".format(self.noise))

    @classmethod
    def plan(cls, subjects, size, seed, train_fraction=0.8, **options):
        if isinstance(size, int):
            size = (size, size, size)
        train, test = split_dataset(range(subjects), train_fraction, seed)
        roles = {s: TRAIN_ROLE for s in train}
        roles.update({s: TEST_ROLE for s in test})
        return cls(seed=seed, size=size, train_fraction=train_fraction,
                   roles=dict(sorted(roles.items())), **options)

    def subjects(self, role=None):
        return [s for s, r in self.roles.items() if role is None or r == role]

    def is_stored_misaligned(self, subject, contrast):
        """
        Only the training volumes of the target contrast move; the source contrast stays as registered
        """
        return self.misaligned and contrast == self.misaligned_contrast and self.roles[subject] == TRAIN_ROLE

    def relative_path(self, subject, contrast):
        return Path(self.roles[subject]) / volume_filename(
            subject, contrast, self.is_stored_misaligned(subject, contrast))

    def to_config(self):
        parser = configparser.ConfigParser(interpolation=None)
        parser['dataset'] = {
            'seed': str(self.seed),
            'size': ','.join(str(n) for n in self.size),
            'n_tissues': str(self.n_tissues),
            'protocols': self.protocols,
            'noise': repr(float(self.noise)),
            'misaligned': str(self.misaligned).lower(),
            'misaligned_contrast': self.misaligned_contrast,
            'resample_contrast': self.resample_contrast or '',
            'max_rot_deg': repr(float(self.max_rot_deg)),
            'max_shift_vox': repr(float(self.max_shift_vox)),
            'train_fraction': repr(float(self.train_fraction)),
        }
        for contrast in CONTRASTS:
            tr, te = PROTOCOL_PRESETS[self.protocols][contrast]
            parser['protocol.' + contrast] = {'tr': repr(tr), 'te': repr(te)}
        for contrast, (mean, std) in sorted(self.stats.items()):
            parser['stats.' + contrast] = {'mean': repr(mean), 'std': repr(std)}
        for subject, role in self.roles.items():
            parser['subject.{0:04d}'.format(subject)] = {
                'seed': str(subject_seed(self.seed, subject)),
                'role': role,
                't1': self.relative_path(subject, 'T1').as_posix(),
                't2': self.relative_path(subject, 'T2').as_posix(),
            }
        return parser

    def write(self, path):
        with open(path, 'w') as f:
            self.to_config().write(f)

    @classmethod
    def load(cls, path):
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path) as f:
                parser.read_file(f)
            section = parser['dataset']
            roles, stats = {}, {}
            for name in parser.sections():
                if name.startswith('subject.'):
                    roles[int(name.split('.', 1)[1])] = parser[name]['role']
                elif name.startswith('stats.'):
                    stats[name.split('.', 1)[1]] = (float(parser[name]['mean']), float(parser[name]['std']))
            return cls(
                seed=section.getint('seed'),
                size=tuple(int(n) for n in section['size'].split(',')),
                n_tissues=section.getint('n_tissues'),
                protocols=section['protocols'],
                noise=section.getfloat('noise'),
                misaligned=section.getboolean('misaligned'),
                misaligned_contrast=section['misaligned_contrast'],
                resample_contrast=section.get('resample_contrast') or None,
                max_rot_deg=section.getfloat('max_rot_deg'),
                max_shift_vox=section.getfloat('max_shift_vox'),
                train_fraction=section.getfloat('train_fraction'),
                roles=roles,
                stats=stats)
        except (configparser.Error, KeyError, ValueError) as e:
            raise FileFormatError(path, "invalid dataset manifest", e)


def _render_subject(manifest, subject):
    """
    Raw (un-normalized) volumes of one subject keyed by contrast
    """
    seed = subject_seed(manifest.seed, subject)
    maps = generate_phantom(seed, manifest.size, manifest.n_tissues)
    volumes = {}
    for contrast in CONTRASTS:
        tag = CONTRAST_TAGS[contrast]
        volume = render_contrast(maps, protocol_for(contrast, manifest.protocols), manifest.noise, seed=[seed, tag])
        volume.subject = subject
        if contrast == manifest.resample_contrast:
            volume = resample_round_trip(volume, [seed, tag, 2], manifest.max_rot_deg, manifest.max_shift_vox)
        if manifest.is_stored_misaligned(subject, contrast):
            volume = misalign(volume, [seed, tag, 1], manifest.max_rot_deg, manifest.max_shift_vox)
        volumes[contrast] = volume
    return volumes


def build_dataset(manifest, out_dir, threads=None, pgm=False):
    """
    Renders, normalizes and writes every volume of ``manifest`` under ``out_dir``.

    Pooled normalization statistics come from the training subjects only and are
    stored in the manifest so test volumes are normalized with the same values.
    """
    out_dir = Path(out_dir)
    subjects = manifest.subjects()
    with ThreadPoolExecutor(max_workers=resolve_threads(threads)) as executor:
        rendered = dict(zip(subjects, executor.map(lambda s: _render_subject(manifest, s), subjects)))

    train = manifest.subjects(TRAIN_ROLE)
    manifest.stats = {contrast: pooled_statistics([rendered[s][contrast] for s in train]) for contrast in CONTRASTS}

    for role in (TRAIN_ROLE, TEST_ROLE):
        (out_dir / role).mkdir(parents=True, exist_ok=True)
    if pgm:
        (out_dir / 'pgm').mkdir(exist_ok=True)
    for subject in subjects:
        for contrast, volume in rendered[subject].items():
            normalized = normalize_volume(volume, manifest.stats[contrast])
            relative = manifest.relative_path(subject, contrast)
            write_volume(out_dir / relative, normalized)
            if pgm:
                write_pgm(out_dir / 'pgm' / relative.with_suffix('.pgm').name,
                          normalized.data[normalized.dims[0] // 2])
    manifest.write(out_dir / MANIFEST_NAME)
    log.info("dataset with %s subjects written to %s", len(subjects), out_dir)
    return manifest


def generate_dataset(out_dir, subjects, size, seed, threads=None, pgm=False, **options):
    manifest = DatasetManifest.plan(subjects, size, seed, **options)
    return build_dataset(manifest, out_dir, threads=threads, pgm=pgm)


class Dataset(object):
    """
    A generated dataset on disk; volumes are read on first access
    """

    def __init__(self, root, manifest):
        self.root = Path(root)
        self.manifest = manifest
        self._cache = {}

    @classmethod
    def load(cls, root):
        root = Path(root)
        path = root / MANIFEST_NAME
        if not path.is_file():
            raise DataError("No dataset manifest at {0}".format(path))
        return cls(root, DatasetManifest.load(path))

    @property
    def misaligned(self):
        return self.manifest.misaligned

    @property
    def misaligned_contrast(self):
        return self.manifest.misaligned_contrast if self.manifest.misaligned else None

    def subjects(self, role=None):
        return self.manifest.subjects(role)

    def volume(self, subject, contrast):
        key = (subject, contrast)
        if key not in self._cache:
            if subject not in self.manifest.roles:
                raise DataError("Subject {0} is not in the dataset".format(subject))
            self._cache[key] = read_volume(self.root / self.manifest.relative_path(subject, contrast), subject)
        return self._cache[key]

    def pairs(self, role, source_contrast, target_contrast):
        return [(self.volume(s, source_contrast), self.volume(s, target_contrast)) for s in self.subjects(role)]

    def task_label(self, source_contrast, target_contrast):
        return task_label(source_contrast, target_contrast, self.manifest.resample_contrast)

    def samples(self, role, source_contrast, target_contrast, k, mode, image_size):
        samples = []
        for source, target in self.pairs(role, source_contrast, target_contrast):
            samples.extend(extract_slices(source, target, k, mode, image_size))
        return samples
