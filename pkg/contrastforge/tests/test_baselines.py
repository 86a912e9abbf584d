"""
Copy and cubic intensity-mapping baselines
"""
import logging

import numpy as np
import pytest

from contrastforge.baselines import CubicBaseline, baseline_regress, copy_source
from contrastforge.constants import T1, T2
from contrastforge.exceptions import FitError
from contrastforge.volumes import Volume


def source_volume(seed=0, dims=(2, 12, 12)):
    rng = np.random.default_rng(seed)
    data = rng.uniform(0.05, 1.0, size=dims)
    data[:, :2] = 0.0
    return Volume(data, T1, subject=7)


class TestCubicFit:

    def test_identity(self):
        source = source_volume()
        baseline = baseline_regress([(source, source.data)])
        assert baseline.coefficients == pytest.approx((0.0, 1.0, 0.0, 0.0), abs=1e-9)
        assert baseline.is_monotone()

    def test_linear_mapping(self):
        source = source_volume(1)
        baseline = baseline_regress([(source.data, 2.0 * source.data)])
        assert baseline(np.array([0.5]))[0] == pytest.approx(1.0, abs=1e-9)

    def test_pooled_over_pairs(self):
        first, second = source_volume(2), source_volume(3)
        poly = (0.1, 0.2, 0.3, 0.4)
        pairs = [(v, np.polynomial.polynomial.polyval(v.data, poly) * v.mask) for v in (first, second)]
        assert baseline_regress(pairs).coefficients == pytest.approx(poly, abs=1e-9)

    def test_too_few_samples(self):
        source = np.zeros((10, 10))
        source[0, :9] = np.linspace(0.1, 0.9, 9)
        with pytest.raises(FitError):
            baseline_regress([(source, source)])

    def test_degenerate(self):
        source = np.full((12, 12), 0.5)
        with pytest.raises(FitError):
            baseline_regress([(source, source)])

    def test_shape_mismatch(self):
        with pytest.raises(FitError):
            baseline_regress([(np.ones((12, 12)), np.ones((12, 13)))])

    def test_non_monotone_falls_back_to_line(self, caplog):
        source = source_volume(4)
        target = np.sin(6.0 * source.data) * source.mask
        with caplog.at_level(logging.WARNING, logger='contrastforge.baselines'):
            baseline = baseline_regress([(source, target)])
        assert 'not monotone' in caplog.text
        assert baseline.coefficients[2:] == (0.0, 0.0)
        assert baseline.is_monotone(0.0, 1.0)
        support = source.data[source.mask]
        line = np.polynomial.polynomial.polyfit(support, target[source.mask], 1)
        assert baseline.coefficients[:2] == pytest.approx(tuple(line), abs=1e-9)

    def test_decreasing_cubic_is_kept(self, caplog):
        source = source_volume(5)
        target = (1.0 - source.data ** 3) * source.mask
        with caplog.at_level(logging.WARNING, logger='contrastforge.baselines'):
            baseline = baseline_regress([(source, target)])
        assert baseline.coefficients == pytest.approx((1.0, 0.0, 0.0, -1.0), abs=1e-9)
        assert 'not monotone' not in caplog.text


class TestApply:

    def test_background_stays_zero(self):
        source = source_volume()
        out = CubicBaseline((0.5, 1.0, 0.0, 0.0)).apply(source, T2)
        assert out.contrast == T2 and out.subject == 7
        assert np.all(out.data[:, :2] == 0.0)
        assert np.allclose(out.data[:, 2:], 0.5 + source.data[:, 2:])

    def test_copy_source(self):
        source = source_volume()
        copied = copy_source(source, T2)
        assert copied.contrast == T2 and copied.subject == source.subject
        assert np.array_equal(copied.data, source.data)
        assert copied.data is not source.data
