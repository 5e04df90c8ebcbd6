"""One-shot pruning comparators: opacity rank and accumulated render weight.

Each criterion comes in a deterministic flavor (keep the top budget_B) and
a stochastic one (sample budget_B survivors without replacement with
probability proportional to the weight), since treating the weights as
relative retention probabilities avoids carving structural voids into
dense regions.  Deterministic ranking breaks ties by layer key, which makes
the surviving set independent of storage order.
"""

import numpy as np

from .core import ContractViolationError, Scene, compact_scene


def _weighted_sample_without_replacement(weights: np.ndarray, budget: int,
                                         rng: np.random.Generator) -> np.ndarray:
    """Indices of ``budget`` survivors, inclusion chance proportional to weight.

    Uses exponential-race keys (Efraimidis-Spirakis), equivalent to drawing
    survivors one at a time proportionally without replacement.  Zero-weight
    rows are only used to pad when fewer than ``budget`` rows have positive
    weight.
    """
    n = weights.shape[0]
    positive = np.flatnonzero(weights > 0)
    if positive.size >= budget:
        keys = np.log(rng.uniform(size=positive.size)) / weights[positive]
        return positive[np.argsort(keys, kind="stable")[::-1][:budget]]
    zeros = np.flatnonzero(weights <= 0)
    pad = rng.permutation(zeros)[:budget - positive.size]
    return np.concatenate([positive, pad])


def _keep(scene: Scene, alive_idx: np.ndarray, survivors: np.ndarray) -> Scene:
    mask = np.zeros(scene.n_total, dtype=bool)
    mask[alive_idx[survivors]] = True
    scene.alive = mask
    return compact_scene(scene)


def _prune_by_weight(scene: Scene, weights: np.ndarray, budget_B: int,
                     stochastic: bool, rng: np.random.Generator | None) -> Scene:
    idx = np.flatnonzero(scene.alive)
    if budget_B > idx.size:
        raise ContractViolationError(
            f"budget {budget_B} exceeds alive count {idx.size}")
    if budget_B == idx.size:
        return scene
    w = np.asarray(weights, dtype=np.float64)[idx]
    if stochastic:
        if rng is None:
            raise ContractViolationError("stochastic pruning needs a random generator")
        survivors = _weighted_sample_without_replacement(w, budget_B, rng)
    else:
        order = np.lexsort((scene.layer[idx], -w))
        survivors = order[:budget_B]
    return _keep(scene, idx, survivors)


def prune_by_opacity(scene: Scene, budget_B: int, stochastic: bool = True,
                     rng: np.random.Generator | None = None) -> Scene:
    """Keep budget_B primitives ranked (or sampled) by current opacity."""
    return _prune_by_weight(scene, scene.alpha(), budget_B, stochastic, rng)


def prune_by_render_weight(scene: Scene, render_outputs, budget_B: int,
                           stochastic: bool = True,
                           rng: np.random.Generator | None = None) -> Scene:
    """Keep budget_B primitives by blend weight accumulated over views.

    ``render_outputs`` is either an iterable of forward-pass outputs (their
    per-primitive weights are summed) or a ready (N,) weight array.
    """
    if isinstance(render_outputs, np.ndarray):
        acc = render_outputs.astype(np.float64, copy=True)
    else:
        acc = None
        for out in render_outputs:
            w = out.weight if hasattr(out, "weight") else np.asarray(out)
            acc = w.astype(np.float64, copy=True) if acc is None else acc + w
        if acc is None:
            raise ContractViolationError("no render outputs supplied")
    if acc.shape[0] != scene.n_total:
        raise ContractViolationError(
            f"weights cover {acc.shape[0]} rows, scene has {scene.n_total}")
    return _prune_by_weight(scene, acc, budget_B, stochastic, rng)
