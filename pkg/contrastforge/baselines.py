"""
Reference methods that need no network: copy the source, or map intensities through a fitted cubic
"""
import logging
from dataclasses import dataclass

import numpy as np

from contrastforge.exceptions import FitError
from contrastforge.volumes import Volume

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

COPY = 'copy'
CUBIC = 'cubic'
BASELINES = (COPY, CUBIC)
MIN_FIT_SAMPLES = 100


def copy_source(source, target_contrast):
    return Volume(np.array(source.data), target_contrast, subject=source.subject)


@dataclass(frozen=True)
class CubicBaseline:
    """
    target ~ c0 + c1 s + c2 s^2 + c3 s^3, applied inside the source support
    """
    coefficients: tuple

    def __call__(self, values):
        return np.polynomial.polynomial.polyval(np.asarray(values, dtype=np.float64), self.coefficients)

    def apply(self, source, target_contrast):
        data = np.where(source.mask, self(source.data), 0.0)
        return Volume(data, target_contrast, subject=source.subject)

    def is_monotone(self, low=0.0, high=1.0):
        """
        Non-decreasing or non-increasing over [low, high]
        """
        slopes = np.polynomial.polynomial.polyval(
            np.linspace(low, high, 257), np.polynomial.polynomial.polyder(self.coefficients))
        return bool(np.all(slopes >= 0) or np.all(slopes <= 0))


def _pooled_pairs(pairs):
    sources, targets = [], []
    for source, target in pairs:
        source = np.asarray(getattr(source, 'data', source), dtype=np.float64)
        target = np.asarray(getattr(target, 'data', target), dtype=np.float64)
        if source.shape != target.shape:
            raise FitError("Source and target shapes differ: {0} and {1}".format(source.shape, target.shape))
        support = (source != 0) | (target != 0)
        sources.append(source[support])
        targets.append(target[support])
    if not sources:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(sources), np.concatenate(targets)


def _least_squares(source, target, terms):
    design = np.vander(source, terms, increasing=True)
    coefficients, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < terms:
        raise FitError("Degenerate design matrix of rank {0}".format(rank))
    return tuple(float(c) for c in coefficients)


def baseline_regress(pairs):
    """
    Least-squares cubic of target intensity against source intensity, pooled
    over the support of every (source, target) pair.

    A cubic that turns over inside the fitted source range would map two source
    intensities to one target; such fits are replaced by the least-squares line.
    """
    source, target = _pooled_pairs(pairs)
    if source.size < MIN_FIT_SAMPLES:
        raise FitError("Need at least {0} samples to fit, got {1}".format(MIN_FIT_SAMPLES, source.size))
    coefficients = _least_squares(source, target, 4)
    baseline = CubicBaseline(coefficients)
    low, high = float(source.min()), float(source.max())
    if not baseline.is_monotone(low, high):
        log.warning("fitted cubic %s is not monotone on [%s, %s], falling back to a line",
                    baseline.coefficients, low, high)
        baseline = CubicBaseline(_least_squares(source, target, 2) + (0.0, 0.0))
    log.debug("cubic baseline from %s samples: %s", source.size, baseline.coefficients)
    return baseline
