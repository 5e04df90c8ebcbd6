"""One-shot pruning baselines, and why fitness beats opacity alone.

Two classic heuristics prune a fitted scene to budget in a single cut:
keep the most opaque primitives, or keep the ones with the largest
accumulated render weight.  Both exist in deterministic (top-B) and
stochastic (probability-proportional sampling without replacement)
forms.  The micro-scene at the end shows the failure mode survival
pressure avoids: an opaque primitive that contributes nothing to the
image survives an opacity cut but not the competition.
"""

import numpy as np

from splat2d.baselines import prune_by_opacity, prune_by_render_weight
from splat2d.core import Gaussian2D, scene_from_gaussians
from splat2d.densify import init_scene
from splat2d.harness import load_image
from splat2d.metrics import psnr
from splat2d.optimizer import init_optimizer, step
from splat2d.renderer import Viewport, compute_loss, render, render_backward

target = load_image("assets/rocket_64.png")
h, w = target.shape[:2]
vp = Viewport(width=w, height=h)
rng = np.random.default_rng(2)


def fitted_scene(iters=600):
    scene = init_scene(target, n0=500, rng=np.random.default_rng(2))
    init_optimizer(scene)
    for _ in range(iters):
        out = render(scene, vp)
        loss = compute_loss(out.image, target)
        step(scene, render_backward(scene, out, loss.d_image), scene.opt)
    return scene


budget = 125
for name, cut in (
    ("opacity, deterministic",
     lambda s: prune_by_opacity(s, budget, stochastic=False)),
    ("opacity, stochastic", lambda s: prune_by_opacity(s, budget, rng=rng)),
    ("render weight, deterministic",
     lambda s: prune_by_render_weight(s, render(s, vp).weight, budget,
                                      stochastic=False)),
):
    scene = fitted_scene()
    before = psnr(render(scene, vp).image, target)
    cut(scene)
    after = psnr(render(scene, vp).image, target)
    print(f"{name:>30s}: {before:.2f} dB -> {after:.2f} dB "
          f"({scene.n_alive} survivors)")

# --- fitness-wins micro-scene ----------------------------------------------
# one primitive paints a real blob, the other is opaque but hidden behind it;
# opacity ranking keeps the wrong one, render weight keeps the right one

useful = Gaussian2D(mean=[8.0, 8.0], log_scale=np.log([3.0, 3.0]), rotation=0.0,
                    v=1.0, color=[1.0, 0.3, 0.0], layer=0.0)
useless = Gaussian2D(mean=[8.0, 8.0], log_scale=np.log([0.4, 0.4]), rotation=0.0,
                     v=4.0, color=[0.0, 0.0, 1.0], layer=1.0)
micro = scene_from_gaussians([useful, useless])
out = render(micro, Viewport(width=16, height=16))

print("\nmicro-scene alphas:", np.round(micro.alpha(), 3),
      " render weights:", np.round(out.weight, 3))

by_alpha = micro.copy()
prune_by_opacity(by_alpha, 1, stochastic=False)
by_weight = micro.copy()
prune_by_render_weight(by_weight, out.weight, 1, stochastic=False)
print("opacity cut keeps layer", float(by_alpha.layer[by_alpha.alive][0]),
      " weight cut keeps layer", float(by_weight.layer[by_weight.alive][0]))
