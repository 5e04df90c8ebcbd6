"""Forward rendering and the analytic backward pass, from scratch.

Builds a three-primitive scene by hand, composites it front to back,
and then checks one analytic gradient against central finite
differences, which is the same check the test suite runs on random
scenes.
"""

import numpy as np

from splat2d.core import Gaussian2D, activate_opacity, scene_from_gaussians
from splat2d.renderer import Viewport, compute_loss, render, render_backward

# --- a scene is a struct of arrays, one row per primitive ------------------

scene = scene_from_gaussians([
    # alpha = sigmoid(v); smaller layer composites in front
    Gaussian2D(mean=[12.0, 10.0], log_scale=np.log([3.0, 1.5]), rotation=0.6,
               v=0.8, color=[0.9, 0.2, 0.1], layer=0.0),
    Gaussian2D(mean=[20.0, 18.0], log_scale=np.log([2.0, 2.0]), rotation=0.0,
               v=0.2, color=[0.1, 0.4, 0.9], layer=1.0),
    Gaussian2D(mean=[16.0, 14.0], log_scale=np.log([4.0, 2.0]), rotation=-0.4,
               v=-0.5, color=[0.2, 0.8, 0.3], layer=2.0),
])

print("alphas:", np.round(activate_opacity(scene.v), 4))

# --- forward pass -----------------------------------------------------------

vp = Viewport(width=32, height=28)
out = render(scene, vp)
print("image shape:", out.image.shape)
print("pixel (10, 12):", np.round(out.image[10, 12], 4))

# transmittance is what is left for anything behind the scene; where no
# primitive covers a pixel it stays exactly 1
print("transmittance range: [%.4f, %.4f]"
      % (out.transmittance.min(), out.transmittance.max()))

# per-primitive accumulated weight says how much each one contributed
print("render weights:", np.round(out.weight, 2))

# a crop view renders the same scene through a smaller window; pixel (y, x)
# of the crop equals pixel (y + oy, x + ox) of the full frame
crop = render(scene, Viewport(width=8, height=8, origin_x=10, origin_y=8))
assert np.allclose(crop.image[2, 2], out.image[10, 12])

# --- backward pass ----------------------------------------------------------

# fit toward a constant gray target just to have a loss surface
target = np.full((28, 32, 3), 0.5)
loss = compute_loss(out.image, target)
print("loss: total %.5f  l1 %.5f  ssim %.4f" % (loss.total, loss.l1, loss.ssim))

grads = render_backward(scene, out, loss.d_image)
print("d_loss/d_mean:\n", np.round(grads.mean, 6))

# finite-difference check on one coordinate: nudge, re-render, re-measure
k, eps = 0, 1e-5
for sign in (+1, -1):
    scene.mean[k, 0] += sign * eps
    val = compute_loss(render(scene, vp).image, target).total
    scene.mean[k, 0] -= sign * eps
    if sign > 0:
        up = val
    else:
        down = val
fd = (up - down) / (2 * eps)
print("analytic %.8f  finite-diff %.8f  rel err %.2e"
      % (grads.mean[k, 0], fd, abs(grads.mean[k, 0] - fd) / abs(fd)))
