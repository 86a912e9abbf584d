"""
Parametric head phantoms, contrast rendering and intensity normalization
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from contrastforge.constants import (
    CONTRAST_TAGS, DEFAULT_PROTOCOLS, INTRA_CLASS_VARIATION, MISALIGNED, NORMALIZATION_SIGMAS, PROTOCOL_PRESETS,
    RESAMPLED, TISSUE_RANGES)
from contrastforge.exceptions import ConfigurationError, DataError
from contrastforge.volumes import Alignment, Volume

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

MIN_PHANTOM_SIZE = 16


@dataclass
class TissueMaps:
    """
    Co-registered proton density, T1 (ms) and T2 (ms) fields; zero outside the head
    """
    pd: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    subject_seed: int
    labels: np.ndarray = None

    @property
    def mask(self):
        return self.pd > 0


@dataclass(frozen=True)
class Protocol:
    tr: float
    te: float
    label: str

    def __post_init__(self):
        if not self.tr > 0:
            raise ConfigurationError("TR must be positive, got {0}".format(self.tr))
        if self.te < 0:
            raise ConfigurationError("TE must be non-negative, got {0}".format(self.te))
        if self.label not in CONTRAST_TAGS:
            raise ConfigurationError("Unknown contrast {0}".format(self.label))


def protocol_for(contrast, preset=DEFAULT_PROTOCOLS):
    try:
        tr, te = PROTOCOL_PRESETS[preset][contrast]
    except KeyError:
        raise ConfigurationError("No protocol preset {0} for contrast {1}".format(preset, contrast))
    return Protocol(tr=tr, te=te, label=contrast)


def _grid(size):
    axes = [np.linspace(-1.0, 1.0, n) for n in size]
    return np.meshgrid(*axes, indexing='ij')


def _smooth_field(rng, size, sigma):
    field = ndimage.gaussian_filter(rng.standard_normal(size), sigma=sigma, mode='nearest')
    std = field.std()
    return field / std if std > 0 else field


def _ellipsoid(grid, center, radii):
    return sum(((g - c) / r) ** 2 for g, c, r in zip(grid, center, radii))


def tissue_ranges(n_tissues):
    """
    (PD, T1, T2) ranges for ``n_tissues`` classes.

    Classes past the fixed table blend two neighbouring fixed classes, cycling
    through the pairs with the blend weight moving toward the second class on
    every pass, so each extra class gets its own parameters.
    """
    if n_tissues < 2:
        raise ConfigurationError("n_tissues must be at least 2, got {0}".format(n_tissues))
    ranges = list(TISSUE_RANGES[:n_tissues])
    pairs = len(TISSUE_RANGES) - 1
    for extra in range(n_tissues - len(ranges)):
        first, second = TISSUE_RANGES[extra % pairs], TISSUE_RANGES[extra % pairs + 1]
        weight = (extra // pairs + 1) / (extra // pairs + 2)
        blended = (1.0 - weight) * np.array(first) + weight * np.array(second)
        ranges.append(tuple(tuple(bounds) for bounds in blended.tolist()))
    return tuple(ranges)


def generate_phantom(subject_seed, size=(64, 64, 64), n_tissues=5):
    """
    Seeded head-shaped phantom.

    A perturbed ellipsoid bounds the head; an outer shell and a handful of
    ellipsoidal blobs carve it into tissue classes whose (PD, T1, T2) values
    are drawn from physiological ranges (see ``tissue_ranges``), then modulated by a smooth
    low-amplitude field.
    """
    size = tuple(int(n) for n in size)
    if len(size) != 3 or min(size) < MIN_PHANTOM_SIZE:
        raise ConfigurationError("phantom size must be three axes of at least {0}, got {1}".format(
            MIN_PHANTOM_SIZE, size))
    ranges = tissue_ranges(n_tissues)

    rng = np.random.default_rng(subject_seed)
    grid = _grid(size)
    smoothing = max(size) / 16.0

    center = rng.uniform(-0.05, 0.05, size=3)
    radii = rng.uniform(0.72, 0.85, size=3)
    head_radius = _ellipsoid(grid, center, radii) + 0.15 * _smooth_field(rng, size, smoothing)
    head = head_radius <= 1.0

    labels = np.full(size, -1, dtype=np.int64)
    labels[head] = 0
    labels[head & (head_radius > 0.7)] = 1
    for _ in range(int(rng.integers(3, 7))):
        blob_center = center + rng.uniform(-0.45, 0.45, size=3)
        blob_radii = rng.uniform(0.1, 0.3, size=3)
        tissue = int(rng.integers(1, n_tissues))
        labels[head & (_ellipsoid(grid, blob_center, blob_radii) <= 1.0)] = tissue

    maps = []
    for parameter in range(3):
        values = np.zeros(size)
        for tissue in range(n_tissues):
            low, high = ranges[tissue][parameter]
            values[labels == tissue] = rng.uniform(low, high)
        variation = 1.0 + INTRA_CLASS_VARIATION * _smooth_field(rng, size, smoothing / 2.0)
        maps.append(np.where(head, values * np.maximum(variation, 0.5), 0.0))

    pd, t1, t2 = maps
    log.debug("phantom %s: %s head voxels", subject_seed, int(head.sum()))
    return TissueMaps(pd=pd, t1=t1, t2=t2, subject_seed=subject_seed, labels=labels)


def signal(pd, t1, t2, tr, te):
    """
    S = PD (1 - exp(-TR/T1)) exp(-TE/T2)
    """
    return pd * (1.0 - np.exp(-tr / t1)) * np.exp(-te / t2)


def render_contrast(maps, protocol, noise=0.0, seed=None):
    """
    Renders one contrast; ``noise`` is relative to the in-mask mean signal and
    stays inside the head, and the magnitude is taken so intensities stay non-negative.
    """
    if noise < 0:
        raise ConfigurationError("noise amplitude must be non-negative, got {0}".format(noise))
    mask = maps.mask
    data = np.zeros(maps.pd.shape)
    data[mask] = signal(maps.pd[mask], maps.t1[mask], maps.t2[mask], protocol.tr, protocol.te)
    if noise > 0 and mask.any():
        rng = np.random.default_rng(seed)
        sigma = noise * data[mask].mean()
        data[mask] = np.abs(data[mask] + sigma * rng.standard_normal(int(mask.sum())))
    return Volume(data, protocol.label, subject=maps.subject_seed)


def _brain_mask(volume, mask):
    mask = volume.mask if mask is None else np.asarray(mask, dtype=bool)
    if not mask.any():
        raise DataError("Empty brain mask for subject {0} {1}".format(volume.subject, volume.contrast))
    return mask


def mean_normalize(volume, mask=None):
    """
    Scales the volume so its in-mask mean is 1
    """
    mask = _brain_mask(volume, mask)
    brain_mean = volume.data[mask].mean()
    if brain_mean == 0:
        raise DataError("Zero in-mask mean for subject {0} {1}".format(volume.subject, volume.contrast))
    return volume.with_data(volume.data / brain_mean)


def pooled_statistics(volumes):
    """
    Mean and population std of in-mask voxels pooled over mean-normalized volumes
    """
    pooled = [mean_normalize(v).data[v.mask] for v in volumes]
    if not pooled:
        raise DataError("No volumes to pool statistics from")
    voxels = np.concatenate(pooled)
    return float(voxels.mean()), float(voxels.std())


def normalize_volume(volume, pooled_stats, mask=None):
    """
    In-mask mean to 1, then pooled mean + 3 std to 1, then clip to [0, 1]
    """
    pooled_mean, pooled_std = pooled_stats
    threshold = pooled_mean + NORMALIZATION_SIGMAS * pooled_std
    if not threshold > 0:
        raise DataError("Normalization threshold must be positive, got {0}".format(threshold))
    scaled = mean_normalize(volume, mask).data / threshold
    return volume.with_data(np.clip(scaled, 0.0, 1.0))


def _rigid_matrix(shape, angle_deg, shift, inverse):
    theta = np.deg2rad(angle_deg)
    rotation = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    center = (np.asarray(shape[1:], dtype=np.float64) - 1.0) / 2.0
    shift = np.asarray(shift, dtype=np.float64)
    if inverse:
        # output samples the input at R (o - c) + c + t
        plane, offset = rotation, center + shift - rotation @ center
    else:
        # output samples the input at R^T (o - c - t) + c
        plane, offset = rotation.T, center - rotation.T @ (center + shift)
    matrix = np.eye(3)
    matrix[1:, 1:] = plane
    return matrix, np.concatenate([[0.0], offset])


def rigid_transform(data, angle_deg, shift, inverse=False):
    """
    In-plane rotation about the slice center followed by a shift, bilinear with zero fill
    """
    if angle_deg == 0 and not np.any(shift):
        return np.array(data, dtype=np.float64)
    matrix, offset = _rigid_matrix(data.shape, angle_deg, shift, inverse)
    return ndimage.affine_transform(data, matrix, offset=offset, order=1, mode='constant', cval=0.0)


def _rigid_params(seed, max_rot_deg, max_shift_vox):
    if max_rot_deg < 0 or max_shift_vox < 0:
        raise ConfigurationError("misalignment bounds must be non-negative")
    rng = np.random.default_rng(seed)
    angle = rng.uniform(-max_rot_deg, max_rot_deg) if max_rot_deg else 0.0
    shift = rng.uniform(-max_shift_vox, max_shift_vox, size=2) if max_shift_vox else np.zeros(2)
    return float(angle), float(shift[0]), float(shift[1])


def misalign(volume, seed, max_rot_deg, max_shift_vox):
    params = _rigid_params(seed, max_rot_deg, max_shift_vox)
    data = rigid_transform(volume.data, params[0], params[1:])
    return volume.with_data(data, Alignment(MISALIGNED, params))


def unalign(volume):
    """
    Applies the inverse of the recorded rigid transform
    """
    angle, shift_y, shift_x = volume.alignment.params
    return volume.with_data(rigid_transform(volume.data, angle, (shift_y, shift_x), inverse=True), Alignment())


def resample_round_trip(volume, seed, max_rot_deg, max_shift_vox):
    """
    Moves a volume away and back again, leaving only the interpolation footprint of a registration step
    """
    params = _rigid_params(seed, max_rot_deg, max_shift_vox)
    moved = rigid_transform(volume.data, params[0], params[1:])
    data = rigid_transform(moved, params[0], params[1:], inverse=True)
    return volume.with_data(data, Alignment(RESAMPLED, params))
