"""Adam over the five parameter groups, with survivorship-aware state.

Moment arrays stay index-aligned with the scene arrays: compaction slices
them through ``take`` and densification appends zero rows, mirroring how
the scene itself grows and shrinks.  The step counter is global, so bias
correction keeps its schedule across pruning events.

The opacity group carries a phase multiplier: selection and recovery run
the pre-activation opacity at a boosted learning rate so primitives can
move through the cull boundary in either direction quickly.  All other
groups respect ``anneal``, a scalar the training loop lowers over time to
settle the geometry once growth and pruning are over.
"""

from dataclasses import dataclass

import numpy as np

from .core import ContractViolationError, Scene
from .renderer import GradientBuffer

GROUPS = ("mean", "log_scale", "rotation", "v", "color")

OPACITY_PHASES = ("normal", "selecting", "recovered")


@dataclass
class LearningRates:
    """Per-group base step sizes; mean is in pixels per unit gradient."""

    mean: float = 0.16
    log_scale: float = 5e-3
    rotation: float = 1e-3
    v: float = 0.05
    color: float = 2.5e-3

    def of(self, group: str) -> float:
        return float(getattr(self, group))


class OptState:
    """First/second moment arrays per group plus the shared step count."""

    def __init__(self, scene: Scene, lrs: LearningRates | None = None,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-15,
                 opacity_boost: float = 4.0):
        self.lrs = lrs if lrs is not None else LearningRates()
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.opacity_boost = opacity_boost
        self.opacity_phase = "normal"
        self.anneal = 1.0
        self.m = {}
        self.s = {}
        for group in GROUPS:
            ref = getattr(scene, group)
            self.m[group] = np.zeros_like(ref)
            self.s[group] = np.zeros_like(ref)

    @property
    def n_rows(self) -> int:
        return self.m["v"].shape[0]

    def take(self, idx: np.ndarray) -> None:
        """Keep only the given rows, in the given order (compaction hook)."""
        for group in GROUPS:
            self.m[group] = self.m[group][idx]
            self.s[group] = self.s[group][idx]

    def append_rows(self, count: int) -> None:
        """Grow by ``count`` rows of zeroed moments for newly added primitives."""
        if count <= 0:
            return
        for group in GROUPS:
            pad = np.zeros((count,) + self.m[group].shape[1:])
            self.m[group] = np.concatenate([self.m[group], pad])
            self.s[group] = np.concatenate([self.s[group], pad])

    def effective_lr(self, group: str) -> float:
        lr = self.lrs.of(group)
        if group == "v":
            # Opacity is deliberately exempt from annealing: selection and
            # recovery need the full step size whenever they happen to run.
            if self.opacity_phase in ("selecting", "recovered"):
                lr *= self.opacity_boost
            return lr
        return lr * self.anneal


def init_optimizer(scene: Scene, lrs: LearningRates | None = None,
                   opacity_boost: float = 4.0) -> OptState:
    state = OptState(scene, lrs=lrs, opacity_boost=opacity_boost)
    scene.opt = state
    return state


_PHASE_NEXT = {
    "normal": ("normal", "selecting"),
    "selecting": ("selecting", "recovered"),
    "recovered": ("recovered", "normal"),
}


def set_opacity_lr_phase(state: OptState, phase: str) -> None:
    if phase not in OPACITY_PHASES:
        raise ContractViolationError(f"unknown opacity phase {phase!r}")
    if phase not in _PHASE_NEXT[state.opacity_phase]:
        raise ContractViolationError(
            f"illegal opacity phase transition {state.opacity_phase!r} -> {phase!r}")
    state.opacity_phase = phase


def step(scene: Scene, grads: GradientBuffer, state: OptState) -> None:
    """One Adam update over alive rows; dead rows are left untouched."""
    if state.n_rows != scene.n_total:
        raise ContractViolationError(
            f"optimizer tracks {state.n_rows} rows, scene has {scene.n_total}")
    idx = np.flatnonzero(scene.alive)
    if idx.size == 0:
        state.step_count += 1
        return
    for group in GROUPS:
        g = getattr(grads, group)[idx]
        if not np.isfinite(g).all():
            raise ContractViolationError(f"non-finite gradient in group {group!r}")
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for group in GROUPS:
        param = getattr(scene, group)
        g = getattr(grads, group)[idx]
        m = state.m[group]
        s = state.s[group]
        m[idx] = state.beta1 * m[idx] + (1.0 - state.beta1) * g
        s[idx] = state.beta2 * s[idx] + (1.0 - state.beta2) * g * g
        update = (m[idx] / bc1) / (np.sqrt(s[idx] / bc2) + state.eps)
        param[idx] -= state.effective_lr(group) * update
