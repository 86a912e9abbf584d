"""
PSNR and SSIM, per slice or per volume, and their aggregation
"""
import asyncio
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from contrastforge.constants import PSNR, SSIM, SSIM_K1, SSIM_K2, SSIM_L, SSIM_SIGMA, SSIM_WINDOW
from contrastforge.exceptions import DataError, UsageError
from contrastforge.settings import resolve_threads

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())


def psnr(ref, test, peak=1.0, mask=None):
    """
    10 log10(peak^2 / MSE); identical images give +inf
    """
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if ref.shape != test.shape:
        raise UsageError("psnr needs equal shapes, got {0} and {1}".format(ref.shape, test.shape))
    if not peak > 0:
        raise UsageError("psnr peak must be positive, got {0}".format(peak))
    error = np.square(ref - test)
    if mask is not None:
        error = error[np.asarray(mask, dtype=bool)]
        if not error.size:
            raise DataError("psnr mask is empty")
    mse = float(error.mean())
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _window_mean(image):
    # 11x11 support at sigma 1.5; 'reflect' repeats the edge sample (symmetric padding)
    return ndimage.gaussian_filter(image, sigma=SSIM_SIGMA, mode='reflect',
                                   truncate=(SSIM_WINDOW // 2) / SSIM_SIGMA)


def ssim_map(ref, test, k1=SSIM_K1, k2=SSIM_K2, dynamic_range=SSIM_L):
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if ref.shape != test.shape or ref.ndim != 2:
        raise UsageError("ssim needs two equal-shape 2-d images, got {0} and {1}".format(ref.shape, test.shape))
    if min(ref.shape) < SSIM_WINDOW:
        raise UsageError("ssim needs images of at least {0}x{0}, got {1}".format(SSIM_WINDOW, ref.shape))
    c1 = (k1 * dynamic_range) ** 2
    c2 = (k2 * dynamic_range) ** 2
    mu_x = _window_mean(ref)
    mu_y = _window_mean(test)
    var_x = _window_mean(ref * ref) - mu_x * mu_x
    var_y = _window_mean(test * test) - mu_y * mu_y
    cov = _window_mean(ref * test) - mu_x * mu_y
    return ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2))


def ssim(ref, test, k1=SSIM_K1, k2=SSIM_K2, dynamic_range=SSIM_L):
    """
    Mean of the Gaussian-windowed SSIM map
    """
    return float(ssim_map(ref, test, k1, k2, dynamic_range).mean())


def normalize_max(data):
    """
    Scales to a maximum intensity of 1; an all-zero array stays zero
    """
    data = np.asarray(data, dtype=np.float64)
    peak = data.max() if data.size else 0.0
    return data / peak if peak > 0 else data


def aggregate(values):
    """
    (mean, sample std, n) over the finite values
    """
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return (math.inf if values else math.nan), 0.0, 0
    std = float(np.std(finite, ddof=1)) if len(finite) > 1 else 0.0
    return float(np.mean(finite)), std, len(finite)


@dataclass(frozen=True)
class ReportRow:
    task: str
    method: str
    metric: str
    mean: float
    std: float
    n: int


@dataclass
class MetricReport:
    """
    Per-image PSNR (dB) and SSIM values of one method on one task
    """
    task: str
    method: str
    psnr: list = field(default_factory=list)
    ssim: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.psnr) != len(self.ssim):
            raise DataError("PSNR and SSIM lists differ in length: {0} and {1}".format(
                len(self.psnr), len(self.ssim)))

    def aggregate(self, metric):
        values = self.psnr if metric == PSNR else self.ssim
        excluded = sum(1 for v in values if not math.isfinite(v))
        if excluded:
            log.warning("%s/%s: %s of %s %s values are infinite and excluded", self.task, self.method, excluded,
                        len(values), metric)
        return aggregate(values)

    def rows(self):
        return [ReportRow(self.task, self.method, metric, *self.aggregate(metric)) for metric in (PSNR, SSIM)]


def _slice_pairs(predictions, references):
    pred_slices = [s for v in predictions for s in normalize_max(v.data)]
    ref_slices = [s for v in references for s in normalize_max(v.data)]
    if len(pred_slices) != len(ref_slices):
        raise DataError("Prediction has {0} slices but reference has {1}".format(
            len(pred_slices), len(ref_slices)))
    if not ref_slices:
        raise DataError("Nothing to evaluate: the test set is empty")
    return list(zip(pred_slices, ref_slices))


def _slice_metrics(pred, ref, mask):
    # background-only slices fall back to the whole image
    return psnr(ref, pred, mask=ref != 0 if mask and ref.any() else None), ssim(ref, pred)


def _volume_metrics(pred, ref, mask):
    pred, ref = normalize_max(pred.data), normalize_max(ref.data)
    if pred.shape != ref.shape:
        raise DataError("Prediction dims {0} differ from reference dims {1}".format(pred.shape, ref.shape))
    value = psnr(ref, pred, mask=ref != 0 if mask else None)
    return value, float(np.mean([ssim(r, p) for p, r in zip(pred, ref)]))


async def evaluate_async(predictions, references, task, method, mask=False, volume_wise=False, threads=None):
    """
    Computes the metrics on a thread pool; results keep slice order whatever the thread count
    """
    predictions, references = list(predictions), list(references)
    if volume_wise:
        if len(predictions) != len(references):
            raise DataError("{0} predicted volumes for {1} references".format(len(predictions), len(references)))
        if not references:
            raise DataError("Nothing to evaluate: the test set is empty")
        jobs = [(_volume_metrics, p, r) for p, r in zip(predictions, references)]
    else:
        jobs = [(_slice_metrics, p, r) for p, r in _slice_pairs(predictions, references)]

    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=resolve_threads(threads)) as executor:
        results = await asyncio.gather(*[loop.run_in_executor(executor, fn, p, r, mask) for fn, p, r in jobs])
    log.debug("%s/%s: evaluated %s items", task, method, len(results))
    return MetricReport(task=task, method=method, psnr=[r[0] for r in results], ssim=[r[1] for r in results])


def evaluate(predictions, references, task, method, mask=False, volume_wise=False, threads=None):
    """
    Slice-wise (default) or volume-wise PSNR/SSIM of predicted volumes against references.
    Both sides are rescaled to maximum intensity 1 per volume first.
    """
    return asyncio.run(evaluate_async(predictions, references, task, method, mask, volume_wise, threads))
