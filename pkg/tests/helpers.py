"""Scene builders shared across test modules."""

import numpy as np

from splat2d.core import Gaussian2D, scene_from_gaussians


def make_gaussian(x=4.0, y=4.0, sx=1.0, sy=1.0, rot=0.0, v=0.0,
                  color=(1.0, 1.0, 1.0), layer=0.0):
    return Gaussian2D(
        mean=np.array([x, y]),
        log_scale=np.array([np.log(sx), np.log(sy)]),
        rotation=rot,
        v=v,
        color=np.array(color, dtype=np.float64),
        layer=layer,
    )


def random_scene(rng, n=4, span=8.0):
    """Overlapping anisotropic gaussians scattered over a span x span canvas."""
    gs = []
    for k in range(n):
        gs.append(make_gaussian(
            x=rng.uniform(0.15, 0.85) * span,
            y=rng.uniform(0.15, 0.85) * span,
            sx=rng.uniform(0.6, 1.8),
            sy=rng.uniform(0.6, 1.8),
            rot=rng.uniform(-np.pi, np.pi),
            v=rng.uniform(-1.5, 1.5),
            color=rng.uniform(0.1, 0.9, size=3),
            layer=float(k),
        ))
    return scene_from_gaussians(gs)
