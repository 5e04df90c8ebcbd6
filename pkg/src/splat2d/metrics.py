"""Image quality metrics and the opacity decay probe.

PSNR and SSIM operate on float images in [0, 1], shaped (H, W) or (H, W, 3).
SSIM uses an 11x11 Gaussian window (sigma 1.5) over valid positions; images
too small for the window fall back to a single uniform window spanning the
whole image.  ``ssim_and_grad`` returns the analytic gradient with respect
to the first argument, computed through the adjoint of the window filter.

For repeated comparisons against a fixed target (the training loop), wrap
the target in an ``SsimReference`` once: its window moments are cached, so
each later call filters only the rendered image.
"""

import numpy as np

from .core import InvalidParameterError
from .kernels import (corr_adjoint_axis0, corr_adjoint_axis1,
                      corr_valid_axis0, corr_valid_axis1, ssim_fields)

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


def psnr(a, b):
    """Peak signal-to-noise ratio in dB, capped at 100 for (near-)identical inputs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse <= 1e-10:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(1.0 / mse))


def _gaussian_taps(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    i = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(i * i) / (2.0 * sigma * sigma))
    return g / g.sum()


def _as_hwc(img):
    x = np.ascontiguousarray(np.asarray(img, dtype=np.float64))
    if x.ndim == 2:
        return x[:, :, None]
    if x.ndim == 3:
        return x
    raise ValueError(f"expected (H, W) or (H, W, C) image, got shape {x.shape}")


class SsimReference:
    """A comparison target with its window moments precomputed."""

    def __init__(self, target):
        self.image = _as_hwc(target)
        h, w, _ = self.image.shape
        self.windowed = min(h, w) >= SSIM_WINDOW
        self._taps = _gaussian_taps()
        self.mu = self.filt(self.image)
        self.var = self.filt(self.image * self.image) - self.mu * self.mu

    def filt(self, z):
        if self.windowed:
            return corr_valid_axis1(corr_valid_axis0(z, self._taps), self._taps)
        return z.mean(axis=(0, 1), keepdims=True)

    def filt_adj(self, u):
        h, w, _ = self.image.shape
        if self.windowed:
            return corr_adjoint_axis0(corr_adjoint_axis1(u, self._taps, w),
                                      self._taps, h)
        return np.broadcast_to(u / (h * w), self.image.shape).copy()


def _as_reference(target) -> SsimReference:
    return target if isinstance(target, SsimReference) else SsimReference(target)


def _ssim_core(x, ref: SsimReference, want_grad):
    y = ref.image
    if x.shape != y.shape:
        raise InvalidParameterError(f"shape mismatch: {x.shape} vs {y.shape}")
    mu_x = ref.filt(x)
    e_xx = ref.filt(x * x)
    e_xy = ref.filt(x * y)
    score, d_mu_x, d_e_xx, d_e_xy = ssim_fields(
        mu_x, ref.mu, e_xx, ref.var, e_xy, SSIM_C1, SSIM_C2, want_grad)
    if not want_grad:
        return score, None
    grad = (ref.filt_adj(d_mu_x) + ref.filt_adj(d_e_xx) * 2.0 * x
            + ref.filt_adj(d_e_xy) * y)
    return score, grad


def ssim(a, b):
    """Mean structural similarity; ``b`` may be an image or an SsimReference."""
    score, _ = _ssim_core(_as_hwc(a), _as_reference(b), want_grad=False)
    return score


def ssim_and_grad(a, b):
    """SSIM score and its analytic gradient with respect to ``a``."""
    x = _as_hwc(a)
    score, grad = _ssim_core(x, _as_reference(b), want_grad=True)
    return score, grad.reshape(np.asarray(a).shape)


def decay_probe(alpha_before, alpha_after):
    """Relative opacity decay (a_pre - a_post) / a_pre, NaN where a_pre is zero."""
    pre = np.asarray(alpha_before, dtype=np.float64)
    post = np.asarray(alpha_after, dtype=np.float64)
    if pre.shape != post.shape:
        raise ValueError(f"shape mismatch: {pre.shape} vs {post.shape}")
    scalar = pre.ndim == 0
    pre = np.atleast_1d(pre)
    post = np.atleast_1d(post)
    out = np.full(pre.shape, np.nan)
    nz = pre != 0.0
    out[nz] = (pre[nz] - post[nz]) / pre[nz]
    return float(out[0]) if scalar else out
