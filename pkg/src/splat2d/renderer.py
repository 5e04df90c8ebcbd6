"""Differentiable splat renderer: forward compositing, adjoint, and loss.

Depth is fixed per primitive through its scalar layer key; compositing runs
front to back in ascending key order with a stable sort, so equal keys keep
storage order.  The backward pass replays the exact pixel coverage recorded
in the forward output (bounding boxes, early-stop indices), which makes the
pair an exact adjoint up to float rounding.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import ContractViolationError, InvalidParameterError, Scene, activate_opacity
from .metrics import SsimReference, ssim_and_grad

L1_WEIGHT = 1.0
SSIM_WEIGHT = 0.2


@dataclass
class Viewport:
    """Pixel grid to composit onto; origin offsets the grid in scene units."""

    width: int
    height: int
    origin_x: float = 0.0
    origin_y: float = 0.0


@dataclass
class RenderOutput:
    """Forward pass result plus the caches the adjoint needs to replay it."""

    image: np.ndarray            # (H, W, 3)
    transmittance: np.ndarray    # (H, W) remaining transparency
    last_proc: np.ndarray        # (H, W) int64, index into order, -1 = none
    weight: np.ndarray           # (N,) accumulated blend weight per primitive
    max_contrib: np.ndarray      # (N,) max single-pixel blend weight
    viewport: Viewport
    order: np.ndarray = field(repr=False, default=None)     # (M,) storage rows, front first
    _alpha: np.ndarray = field(repr=False, default=None)    # (N,) activated opacity
    _inv_cov: np.ndarray = field(repr=False, default=None)  # (N, 3) ia, ib, ic
    _radii: np.ndarray = field(repr=False, default=None)    # (N, 2) bbox half extents


@dataclass
class GradientBuffer:
    """Loss gradients aligned row-for-row with the scene arrays."""

    mean: np.ndarray
    log_scale: np.ndarray
    rotation: np.ndarray
    v: np.ndarray
    color: np.ndarray

    @classmethod
    def zeros(cls, scene: Scene) -> "GradientBuffer":
        n = scene.n_total
        return cls(mean=np.zeros((n, 2)), log_scale=np.zeros((n, 2)),
                   rotation=np.zeros(n), v=np.zeros(n), color=np.zeros((n, 3)))

    def scale(self, factor: float) -> "GradientBuffer":
        return GradientBuffer(mean=self.mean * factor,
                              log_scale=self.log_scale * factor,
                              rotation=self.rotation * factor,
                              v=self.v * factor,
                              color=self.color * factor)

    def add(self, other: "GradientBuffer") -> None:
        self.mean += other.mean
        self.log_scale += other.log_scale
        self.rotation += other.rotation
        self.v += other.v
        self.color += other.color


@dataclass
class LossOutput:
    total: float
    l1: float
    ssim: float
    d_image: np.ndarray


def _check_finite(scene: Scene, idx: np.ndarray) -> None:
    ok = (np.isfinite(scene.mean[idx]).all()
          and np.isfinite(scene.log_scale[idx]).all()
          and np.isfinite(scene.rotation[idx]).all()
          and np.isfinite(scene.v[idx]).all()
          and np.isfinite(scene.color[idx]).all()
          and np.isfinite(scene.layer[idx]).all())
    if not ok:
        raise InvalidParameterError("scene contains non-finite parameters")


def _geometry(scene: Scene, idx: np.ndarray):
    """Inverse covariance entries and 3-sigma bbox half extents per alive row."""
    n = scene.n_total
    inv_cov = np.zeros((n, 3))
    radii = np.zeros((n, 2))
    alpha = np.zeros(n)
    if idx.size == 0:
        return inv_cov, radii, alpha
    c = np.cos(scene.rotation[idx])
    s = np.sin(scene.rotation[idx])
    e1 = np.exp(2.0 * scene.log_scale[idx, 0])
    e2 = np.exp(2.0 * scene.log_scale[idx, 1])
    s00 = c * c * e1 + s * s * e2
    s01 = c * s * (e1 - e2)
    s11 = s * s * e1 + c * c * e2
    det = s00 * s11 - s01 * s01
    if not np.isfinite(det).all() or (det <= 0.0).any():
        raise InvalidParameterError("covariance is singular or overflowed")
    inv_det = 1.0 / det
    inv_cov[idx, 0] = s11 * inv_det
    inv_cov[idx, 1] = -s01 * inv_det
    inv_cov[idx, 2] = s00 * inv_det
    radii[idx, 0] = kernels.BBOX_SIGMA * np.sqrt(s00)
    radii[idx, 1] = kernels.BBOX_SIGMA * np.sqrt(s11)
    alpha[idx] = activate_opacity(scene.v[idx])
    return inv_cov, radii, alpha


def render(scene: Scene, viewport: Viewport) -> RenderOutput:
    """Composit all alive primitives front to back onto the viewport grid."""
    h, w = int(viewport.height), int(viewport.width)
    if h <= 0 or w <= 0:
        raise InvalidParameterError(f"empty viewport {w}x{h}")
    idx = np.flatnonzero(scene.alive)
    _check_finite(scene, idx)
    inv_cov, radii, alpha = _geometry(scene, idx)
    order = idx[np.argsort(scene.layer[idx], kind="stable")]

    image = np.zeros((h, w, 3))
    transm = np.ones((h, w))
    last_proc = np.full((h, w), -1, dtype=np.int64)
    weight = np.zeros(scene.n_total)
    max_contrib = np.zeros(scene.n_total)
    if order.size:
        kernels.splat_forward(scene.mean, inv_cov, radii, alpha, scene.color,
                              order, float(viewport.origin_x), float(viewport.origin_y),
                              image, transm, last_proc, weight, max_contrib)
    return RenderOutput(image=image, transmittance=transm, last_proc=last_proc,
                        weight=weight, max_contrib=max_contrib, viewport=viewport,
                        order=order, _alpha=alpha, _inv_cov=inv_cov, _radii=radii)


def render_backward(scene: Scene, out: RenderOutput, d_image: np.ndarray) -> GradientBuffer:
    """Pull a pixel cotangent back to per-primitive parameter gradients."""
    if d_image.shape != out.image.shape:
        raise ContractViolationError(
            f"cotangent shape {d_image.shape} != image shape {out.image.shape}")
    if out._alpha.shape[0] != scene.n_total:
        raise ContractViolationError(
            "render output does not correspond to this scene "
            f"({out._alpha.shape[0]} rendered rows vs {scene.n_total})")
    n = scene.n_total
    d_mean = np.zeros((n, 2))
    d_inv_cov = np.zeros((n, 3))
    d_alpha = np.zeros(n)
    d_color = np.zeros((n, 3))
    if out.order.size:
        kernels.splat_backward(scene.mean, out._inv_cov, out._radii, out._alpha,
                               scene.color, out.order,
                               float(out.viewport.origin_x), float(out.viewport.origin_y),
                               np.ascontiguousarray(d_image, dtype=np.float64),
                               out.transmittance, out.last_proc,
                               d_mean, d_inv_cov, d_alpha, d_color)

    grads = GradientBuffer.zeros(scene)
    grads.mean = d_mean
    grads.color = d_color
    idx = out.order
    if idx.size == 0:
        return grads
    # opacity chain: a = sigmoid(v)
    a = out._alpha[idx]
    grads.v[idx] = d_alpha[idx] * a * (1.0 - a)

    # covariance chain: inverse entries -> sigma -> (log_scale, rotation)
    ia, ib, ic = out._inv_cov[idx].T
    g_ia, g_ib, g_ic = d_inv_cov[idx].T
    # full-matrix cotangent of M = inv(sigma); off-diagonal split evenly
    m00, m01, m11 = ia, ib, ic
    h00, h01, h11 = g_ia, 0.5 * g_ib, g_ic
    # d sigma = -M H M (all matrices symmetric 2x2)
    p00 = m00 * h00 + m01 * h01
    p01 = m00 * h01 + m01 * h11
    p10 = m01 * h00 + m11 * h01
    p11 = m01 * h01 + m11 * h11
    gs00 = -(p00 * m00 + p01 * m01)
    gs01 = -(p00 * m01 + p01 * m11)
    gs11 = -(p10 * m01 + p11 * m11)

    c = np.cos(scene.rotation[idx])
    s = np.sin(scene.rotation[idx])
    e1 = np.exp(2.0 * scene.log_scale[idx, 0])
    e2 = np.exp(2.0 * scene.log_scale[idx, 1])
    d_e1 = c * c * gs00 + 2.0 * c * s * gs01 + s * s * gs11
    d_e2 = s * s * gs00 - 2.0 * c * s * gs01 + c * c * gs11
    grads.log_scale[idx, 0] = d_e1 * 2.0 * e1
    grads.log_scale[idx, 1] = d_e2 * 2.0 * e2
    grads.rotation[idx] = (gs00 * 2.0 * c * s * (e2 - e1)
                           + 2.0 * gs01 * (c * c - s * s) * (e1 - e2)
                           + gs11 * 2.0 * c * s * (e1 - e2))
    return grads


def compute_loss(image: np.ndarray, target) -> LossOutput:
    """L1 plus SSIM dissimilarity, with the pixel cotangent for the adjoint.

    ``target`` is an image array or a metrics.SsimReference (faster when the
    same target is compared every iteration).
    """
    pixels = target.image if isinstance(target, SsimReference) else np.asarray(target)
    if image.shape != pixels.shape:
        raise InvalidParameterError(
            f"image shape {image.shape} != target shape {pixels.shape}")
    diff = image - pixels
    if not diff.any():
        # Exact match: skip the SSIM pass and return exact zeros.
        return LossOutput(total=0.0, l1=0.0, ssim=1.0,
                          d_image=np.zeros_like(diff))
    l1 = float(np.mean(np.abs(diff)))
    d_l1 = np.sign(diff) / diff.size
    s, d_s = ssim_and_grad(image, target)
    total = L1_WEIGHT * l1 + SSIM_WEIGHT * (1.0 - s)
    d_image = L1_WEIGHT * d_l1 - SSIM_WEIGHT * d_s
    return LossOutput(total=total, l1=l1, ssim=s, d_image=d_image)
