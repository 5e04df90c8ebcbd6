"""Fit a bundled 64x64 photo with growth but no pruning."""

import os

import numpy as np

from splat2d.densify import DensifyConfig, DensifyState, densify_step, init_scene
from splat2d.harness import load_image, save_image
from splat2d.metrics import psnr
from splat2d.optimizer import init_optimizer, step
from splat2d.renderer import Viewport, compute_loss, render, render_backward

target = load_image("assets/camera_64.png")
h, w = target.shape[:2]
rng = np.random.default_rng(0)

# seed a sparse scene: primitive colors come from the pixels under them
scene = init_scene(target, n0=120, rng=rng)
init_optimizer(scene)
vp = Viewport(width=w, height=h)

dens_cfg = DensifyConfig(start_iter=100, end_iter=900, interval=100,
                         grad_threshold=5e-6, max_total=600)
dens_state = DensifyState(scene.n_total)

for it in range(1500):
    out = render(scene, vp)
    loss = compute_loss(out.image, target)
    grads = render_backward(scene, out, loss.d_image)

    # densification watches position gradients and clones/splits the busy ones
    if dens_cfg.start_iter <= it < dens_cfg.end_iter:
        dens_state.observe(scene, grads, out)
    step(scene, grads, scene.opt)
    if dens_cfg.start_iter < it < dens_cfg.end_iter \
            and (it - dens_cfg.start_iter) % dens_cfg.interval == 0:
        report = densify_step(scene, dens_state, dens_cfg, rng)
        print(f"it {it:4d}  cloned {report.cloned:3d}  split {report.split:3d}  "
              f"pruned {report.pruned:3d}  -> {report.n_alive} alive")

    if it % 250 == 0:
        print(f"it {it:4d}  loss {loss.total:.4f}  "
              f"psnr {psnr(out.image, target):.2f} dB  n {scene.n_alive}")

final = render(scene, vp)
print(f"final: psnr {psnr(final.image, target):.2f} dB with {scene.n_alive} primitives")
os.makedirs("demo_out", exist_ok=True)
save_image("demo_out/fit.png", final.image)
print("wrote demo_out/fit.png")
