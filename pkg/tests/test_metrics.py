"""
Testes das métricas de avaliação.
"""
import math

import numpy as np
import pytest

from raq.metrics import (
    EvalRecord,
    bits_per_index,
    bits_per_pixel,
    evaluate_reconstructions,
    mse,
    perplexity,
    psnr,
    psnr_from_mse,
    ssim,
    usage,
)
from raq.untils.constants import REPORT_COLUMNS
from raq.untils.errors import ConfigError, ShapeError


class TestPsnr:
    def test_twenty_decibels(self):
        x = np.zeros((4, 4))
        assert psnr(x, x + 0.1) == pytest.approx(20.0)

    def test_identical_images_hit_cap(self):
        x = np.random.default_rng(0).uniform(size=(2, 16, 16))
        assert psnr(x, x) == 100.0

    def test_cap_for_tiny_error(self):
        assert psnr_from_mse(1e-14) == 100.0

    def test_data_range(self):
        assert psnr_from_mse(1.0, data_range=255.0) == pytest.approx(20 * math.log10(255.0))

    def test_invalid_range(self):
        with pytest.raises(ConfigError):
            psnr_from_mse(0.1, data_range=0.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mse(np.zeros((2, 2)), np.zeros((2, 3)))


class TestSsim:
    def test_identical_is_one(self, rng):
        x = rng.uniform(size=(16, 16))
        assert ssim(x, x) == pytest.approx(1.0)

    def test_constant_images_closed_form(self):
        a, b = 0.2, 0.6
        c1 = (0.01 * 1.0) ** 2
        expected = (2 * a * b + c1) / (a * a + b * b + c1)
        assert ssim(np.full((16, 16), a), np.full((16, 16), b)) == pytest.approx(expected, rel=1e-6)

    def test_inverted_image_is_negative(self, rng):
        x = rng.uniform(size=(16, 16))
        assert ssim(x, 1.0 - x) < 0.0

    def test_batch_is_mean_of_images(self, rng):
        x = rng.uniform(size=(3, 1, 16, 16))
        y = np.clip(x + rng.normal(0.0, 0.1, size=x.shape), 0.0, 1.0)
        per_image = [ssim(x[i, 0], y[i, 0]) for i in range(3)]
        assert ssim(x, y) == pytest.approx(float(np.mean(per_image)))

    def test_noise_lowers_score(self, rng):
        x = rng.uniform(size=(16, 16))
        small = np.clip(x + rng.normal(0.0, 0.05, size=x.shape), 0, 1)
        large = np.clip(x + rng.normal(0.0, 0.3, size=x.shape), 0, 1)
        assert ssim(x, large) < ssim(x, small) < 1.0

    def test_image_smaller_than_window(self):
        with pytest.raises(ShapeError):
            ssim(np.zeros((8, 8)), np.zeros((8, 8)))


class TestCodebookUsage:
    def test_uniform_usage(self):
        assert perplexity([1, 1, 1, 1]) == pytest.approx(4.0)

    def test_single_code(self):
        assert perplexity([5, 0, 0]) == pytest.approx(1.0)

    def test_skewed_usage(self):
        assert perplexity([3, 1]) == pytest.approx(1.7548, abs=1e-4)

    def test_scale_invariant(self):
        assert perplexity([2, 6, 0, 4]) == pytest.approx(perplexity([1, 3, 0, 2]))

    @pytest.mark.parametrize("counts", [[0, 0, 0], [1, -1, 2]])
    def test_invalid_counts(self, counts):
        with pytest.raises(ConfigError):
            perplexity(counts)

    def test_usage_counts_active_codes(self):
        assert usage([0, 3, 0, 1]) == 2


class TestRates:
    def test_bits_per_index(self):
        assert bits_per_index(32) == 5.0
        assert bits_per_index(1) == 0.0

    def test_bits_per_pixel(self):
        assert bits_per_pixel(32, 16, 256) == pytest.approx(0.3125)


class TestEvaluateReconstructions:
    def test_record_fields(self, rng):
        x = rng.uniform(size=(4, 16, 16))
        record = evaluate_reconstructions(x, x, np.array([2, 2, 0]), 3, "dkm", 7)
        assert isinstance(record, EvalRecord)
        assert list(record.as_row()) == REPORT_COLUMNS
        assert record.mse == 0.0
        assert record.psnr == 100.0
        assert record.ssim == pytest.approx(1.0)
        assert record.perplexity == pytest.approx(2.0)
        assert (record.usage, record.k_tilde, record.method, record.seed) == (2, 3, "dkm", 7)
