"""Shared fixtures: kernel warmup and small scene builders."""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import make_gaussian  # noqa: E402
from splat2d.core import scene_from_gaussians  # noqa: E402
from splat2d.kernels import warmup  # noqa: E402


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # Compile the numba kernels once so per-test timings stay honest.
    warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_scene(rng):
    """Four overlapping anisotropic gaussians on an 8x8 canvas."""
    gs = []
    for k in range(4):
        gs.append(make_gaussian(
            x=2.0 + 1.3 * k, y=5.5 - 1.1 * k,
            sx=0.8 + 0.3 * k, sy=1.4 - 0.2 * k,
            rot=0.4 * k - 0.6,
            v=0.5 - 0.4 * k,
            color=rng.uniform(0.1, 0.9, size=3),
            layer=float(k),
        ))
    return scene_from_gaussians(gs)
