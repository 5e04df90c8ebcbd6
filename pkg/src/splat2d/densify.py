"""Scene seeding and gradient-driven density control.

Follows the usual adaptive density recipe: primitives whose accumulated
position gradient stays high are either cloned in place (small ones) or
split into two children sampled from the parent footprint at reduced scale
(large ones, parent retired).  A hard row cap keeps growth bounded so the
later selection stage starts from a known worst case.  Children inherit the
parent depth key plus a tiny jitter, which breaks gradient symmetry between
otherwise identical copies.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import InvalidParameterError, Scene, compact_scene, inverse_opacity

LAYER_JITTER = 1e-6


@dataclass
class DensifyConfig:
    start_iter: int = 500
    end_iter: int = 15000
    interval: int = 100
    grad_threshold: float = 2e-5
    split_threshold_px: float = 4.0   # max std above this splits, below clones
    split_scale_div: float = 1.6
    prune_alpha: float = 0.005
    max_total: int = 120000


@dataclass
class DensifyReport:
    cloned: int = 0
    split: int = 0
    pruned: int = 0
    n_alive: int = 0


class DensifyState:
    """Per-primitive accumulated position-gradient statistics."""

    def __init__(self, n: int):
        self.reset(n)

    def reset(self, n: int) -> None:
        self.accum = np.zeros(n)
        self.count = np.zeros(n)

    def observe(self, scene: Scene, grads, out) -> None:
        if self.accum.shape[0] != scene.n_total:
            raise InvalidParameterError(
                f"densify stats track {self.accum.shape[0]} rows, scene has {scene.n_total}")
        vis = scene.alive & (out.weight > 0.0)
        self.accum[vis] += np.hypot(grads.mean[vis, 0], grads.mean[vis, 1])
        self.count[vis] += 1.0


def init_scene(target: np.ndarray, n0: int, rng: np.random.Generator,
               alpha0: float = 0.1) -> Scene:
    """Seed n0 primitives on a jittered grid, colored from the target image."""
    if target.ndim != 3 or target.shape[2] != 3:
        raise InvalidParameterError(f"target must be (H, W, 3), got {target.shape}")
    if n0 < 1:
        raise InvalidParameterError(f"need at least one primitive, got {n0}")
    h, w = target.shape[:2]
    gw = int(np.ceil(np.sqrt(n0 * w / h)))
    gh = int(np.ceil(n0 / gw))
    xs = (np.arange(gw) + rng.uniform(size=(gh, gw))) * (w / gw)
    ys = (np.arange(gh)[:, None] + rng.uniform(size=(gh, gw))) * (h / gh)
    pos = np.stack([xs.ravel(), ys.ravel()], axis=1)
    keep = rng.permutation(pos.shape[0])[:n0]
    mean = pos[keep]

    px = np.clip(mean[:, 0].astype(np.int64), 0, w - 1)
    py = np.clip(mean[:, 1].astype(np.int64), 0, h - 1)
    color = target[py, px].astype(np.float64)

    sigma = 0.5 * np.sqrt(h * w / n0)
    return Scene(mean=mean,
                 log_scale=np.full((n0, 2), np.log(sigma)),
                 rotation=np.zeros(n0),
                 v=np.full(n0, inverse_opacity(alpha0)),
                 color=color,
                 layer=rng.uniform(size=n0),
                 alive=np.ones(n0, dtype=bool),
                 opt=None,
                 iteration=0)


def _child_rows(scene: Scene, parents: np.ndarray, offsets: np.ndarray,
                scale_shift: float, rng: np.random.Generator) -> dict:
    k = parents.shape[0]
    return dict(mean=scene.mean[parents] + offsets,
                log_scale=scene.log_scale[parents] + scale_shift,
                rotation=scene.rotation[parents].copy(),
                v=scene.v[parents].copy(),
                color=scene.color[parents].copy(),
                layer=scene.layer[parents] + rng.uniform(0.0, LAYER_JITTER, k),
                alive=np.ones(k, dtype=bool))


def densify_step(scene: Scene, state: DensifyState, cfg: DensifyConfig,
                 rng: np.random.Generator) -> DensifyReport:
    """Clone/split high-gradient primitives, prune faded ones, compact."""
    report = DensifyReport()
    avg = np.where(state.count > 0, state.accum / np.maximum(state.count, 1.0), 0.0)
    hot = scene.alive & (avg > cfg.grad_threshold)
    max_std = np.exp(scene.log_scale).max(axis=1)
    clone_mask = hot & (max_std <= cfg.split_threshold_px)
    split_mask = hot & (max_std > cfg.split_threshold_px)

    # net growth is +1 per clone and +1 per split; trim to the row cap,
    # keeping the strongest gradients
    budget = cfg.max_total - scene.n_alive
    cand = np.flatnonzero(clone_mask | split_mask)
    if cand.size > budget:
        keep = cand[np.argsort(avg[cand], kind="stable")[::-1][:max(budget, 0)]]
        chosen = np.zeros(scene.n_total, dtype=bool)
        chosen[keep] = True
        clone_mask &= chosen
        split_mask &= chosen

    clones = np.flatnonzero(clone_mask)
    splits = np.flatnonzero(split_mask)
    report.cloned = clones.size
    report.split = splits.size

    blocks = []
    if clones.size:
        blocks.append(_child_rows(scene, clones, np.zeros((clones.size, 2)), 0.0, rng))
    if splits.size:
        parents = np.repeat(splits, 2)
        z = rng.standard_normal((parents.size, 2))
        c = np.cos(scene.rotation[parents])
        s = np.sin(scene.rotation[parents])
        sx = np.exp(scene.log_scale[parents, 0]) * z[:, 0]
        sy = np.exp(scene.log_scale[parents, 1]) * z[:, 1]
        offsets = np.stack([c * sx - s * sy, s * sx + c * sy], axis=1)
        blocks.append(_child_rows(scene, parents, offsets,
                                  -np.log(cfg.split_scale_div), rng))
        scene.alive[splits] = False

    faded = scene.alive & (scene.alpha() < cfg.prune_alpha)
    report.pruned = int(faded.sum())
    scene.alive[faded] = False

    if blocks:
        added = sum(b["v"].shape[0] for b in blocks)
        for name in ("mean", "log_scale", "rotation", "v", "color", "layer", "alive"):
            parts = [getattr(scene, name)] + [b[name] for b in blocks]
            setattr(scene, name, np.concatenate(parts))
        if scene.opt is not None:
            scene.opt.append_rows(added)

    compact_scene(scene)
    state.reset(scene.n_total)
    report.n_alive = scene.n_alive
    return report
