"""PSNR, SSIM (value and gradient), and the opacity decay probe."""

import numpy as np
import pytest
from skimage.metrics import structural_similarity

from splat2d.core import InvalidParameterError
from splat2d.metrics import PSNR_CAP, SsimReference, decay_probe, psnr, ssim, ssim_and_grad

from oracle import naive_ssim


class TestPsnr:
    def test_identical_hits_cap(self, rng):
        img = rng.uniform(size=(16, 16, 3))
        assert psnr(img, img) == PSNR_CAP == 100.0

    def test_black_versus_white_is_zero(self):
        a = np.zeros((8, 8, 3))
        b = np.ones((8, 8, 3))
        assert psnr(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_constant_offset_twenty_db(self):
        a = np.full((8, 8, 3), 0.4)
        assert psnr(a, a + 0.1) == pytest.approx(20.0, abs=1e-9)

    def test_symmetric(self, rng):
        a = rng.uniform(size=(9, 7, 3))
        b = rng.uniform(size=(9, 7, 3))
        assert psnr(a, b) == psnr(b, a)

    def test_grayscale_shape_accepted(self, rng):
        a = rng.uniform(size=(12, 12))
        assert 0.0 < psnr(a, a * 0.9) < 100.0


class TestSsim:
    def test_identical_is_exactly_one(self, rng):
        img = rng.uniform(size=(24, 24, 3))
        assert ssim(img, img) == 1.0

    def test_negative_image_scores_below_zero(self, rng):
        img = rng.uniform(size=(24, 24, 3))
        assert ssim(img, 1.0 - img) < 0.0

    def test_matches_skimage(self, rng):
        # Same construction: 11x11 gaussian window, sigma 1.5, valid-mode
        # crop, population covariance.
        for trial in range(3):
            a = rng.uniform(size=(32, 32, 3))
            b = np.clip(a + rng.normal(scale=0.1, size=a.shape), 0, 1)
            want = structural_similarity(
                a, b, channel_axis=2, data_range=1.0,
                gaussian_weights=True, sigma=1.5,
                use_sample_covariance=False, crop=True)
            assert ssim(a, b) == pytest.approx(want, abs=1e-4)

    def test_matches_naive_windowed_oracle(self, rng):
        a = rng.uniform(size=(14, 15))
        b = np.clip(a + rng.normal(scale=0.2, size=a.shape), 0, 1)
        assert ssim(a, b) == pytest.approx(naive_ssim(a, b), abs=1e-8)

    def test_small_image_uses_global_window(self, rng):
        # Below the 11-pixel window the score falls back to one uniform
        # window spanning the whole image.
        a = rng.uniform(size=(6, 6, 3))
        b = np.clip(a + rng.normal(scale=0.1, size=a.shape), 0, 1)
        assert ssim(a, b) == pytest.approx(naive_ssim(a, b), abs=1e-10)
        assert ssim(a, a) == 1.0

    def test_gradient_matches_finite_difference(self, rng):
        a = rng.uniform(size=(16, 16, 3))
        b = np.clip(a + rng.normal(scale=0.15, size=a.shape), 0.02, 0.98)
        score, grad = ssim_and_grad(b, a)
        assert score == pytest.approx(ssim(b, a), abs=1e-12)
        h = 1e-5
        for y, x, c in [(3, 4, 0), (8, 8, 1), (12, 2, 2), (0, 15, 0)]:
            bp = b.copy()
            bp[y, x, c] += h
            bm = b.copy()
            bm[y, x, c] -= h
            fd = (ssim(bp, a) - ssim(bm, a)) / (2 * h)
            assert grad[y, x, c] == pytest.approx(fd, rel=1e-4, abs=1e-10)

    def test_reference_object_caches_target(self, rng):
        a = rng.uniform(size=(20, 20, 3))
        b = rng.uniform(size=(20, 20, 3))
        ref = SsimReference(a)
        assert ssim(b, ref) == ssim(b, a)

    def test_shape_mismatch_rejected(self, rng):
        with pytest.raises(InvalidParameterError):
            ssim(rng.uniform(size=(8, 8)), rng.uniform(size=(8, 9)))


class TestDecayProbe:
    def test_halving(self):
        assert decay_probe(0.5, 0.25) == pytest.approx(0.5)

    def test_zero_before_is_nan(self):
        assert np.isnan(decay_probe(0.0, 0.0))

    def test_vectorized(self):
        r = decay_probe(np.array([0.5, 0.0, 0.8]), np.array([0.25, 0.0, 0.2]))
        assert r[0] == pytest.approx(0.5)
        assert np.isnan(r[1])
        assert r[2] == pytest.approx(0.75)

    def test_scalar_returns_float(self):
        assert isinstance(decay_probe(0.4, 0.3), float)
