"""Natural-selection pruning: a uniform opacity pressure field vs. fitness.

Every ``interval_N`` iterations a regularization gradient is injected into
the opacity channel of the gradient buffer, where it competes with the
rendering gradient inside the optimizer.  Primitives whose opacity the
renderer cannot defend drift below the survival threshold and are culled;
the process stops when the survivor count meets the budget, with a one-shot
opacity fallback at the deadline.

Pressure shapes by prior mode:
  finite  -- identical gradient for every primitive; the sigmoid gives
             high-opacity primitives a smaller relative decay (the prior).
  none    -- per-primitive compensated deltas so the relative decay ratio
             is identical regardless of opacity.
  strong  -- each primitive is exempted this round with probability alpha;
             the rest receive the compensated deltas.
The main method runs a short prior-free warm-up (low rate) before switching
to the uniform field; the ablations keep their shape for the whole window.
"""

from dataclasses import dataclass, field

import numpy as np

from . import optimizer as optim_mod
from .core import (ContractViolationError, Scene, SelectionConfig,
                   activate_opacity, boundary_alpha, compact_scene,
                   inverse_opacity)

PHASES = ("inactive", "prefree", "finite_prior", "recovery", "done")

DELTA_CAP_FACTOR = 10.0


@dataclass
class SelectionState:
    phase: str = "inactive"
    iters_in_phase: int = 0
    current_reg_lr: float = 0.0
    E_v: float = 0.0
    grad_v: float = 0.0
    budget: int = 0
    completed_at: int | None = None
    curve_alpha0: float = 0.0
    curve_start: int = 0
    one_shot_used: bool = False
    rng: np.random.Generator | None = None
    last_deltas: np.ndarray = field(default=None, repr=False)

    def target_curve(self, iteration: int, config: SelectionConfig) -> float:
        """Preset boundary-opacity schedule: straight line down to tau."""
        t = (iteration - self.curve_start) / config.auto_target_iters
        value = self.curve_alpha0 + (config.tau - self.curve_alpha0) * t
        return max(value, config.tau)


def init_selection(config: SelectionConfig,
                   rng: np.random.Generator | None = None) -> SelectionState:
    config.validate()
    return SelectionState(current_reg_lr=config.reg_lr, rng=rng)


def reg_gradient(E_v: float, T: float) -> float:
    """Uniform field gradient 2(E_v - T); positive, so descent lowers v."""
    return 2.0 * (E_v - T)


def equalized_deltas(v: np.ndarray, target_ratio: float,
                     cap_factor: float = DELTA_CAP_FACTOR) -> np.ndarray:
    """Per-primitive dv > 0 giving every primitive the same relative decay.

    Solves sigmoid(v - dv) = (1 - target_ratio) * sigmoid(v) exactly, then
    caps at ``cap_factor`` times the median to stop the blow-up as alpha
    approaches one.
    """
    if not 0.0 < target_ratio < 1.0:
        raise ContractViolationError(f"target ratio {target_ratio} outside (0, 1)")
    # keep the logit finite for rows saturated at the float rails; the
    # lower bound is the smallest subnormal, so only exact zeros move
    a = np.clip(activate_opacity(v), 5e-324, 1.0 - 1e-12)
    dv = np.maximum(v - inverse_opacity(a * (1.0 - target_ratio)), 0.0)
    if dv.size > 1:
        dv = np.minimum(dv, cap_factor * np.median(dv))
    return dv


def _nominal_ratio(v_alive: np.ndarray, delta_nominal: float) -> float:
    """Relative decay the mean-opacity primitive sees under a uniform delta."""
    a_bar = float(np.clip(np.mean(activate_opacity(v_alive)), 5e-324, 1.0 - 1e-12))
    v_bar = inverse_opacity(a_bar)
    return 1.0 - activate_opacity(v_bar - delta_nominal) / activate_opacity(v_bar)


def _round_lr(state: SelectionState, config: SelectionConfig) -> float:
    if state.phase == "prefree":
        return state.current_reg_lr * config.prefree_lr_factor
    return state.current_reg_lr


def apply_pressure(scene: Scene, grads, state: SelectionState,
                   config: SelectionConfig):
    """Inject this round's pressure into the opacity gradient channel."""
    if state.phase not in ("prefree", "finite_prior"):
        raise ContractViolationError(f"pressure applied in phase {state.phase!r}")
    idx = np.flatnonzero(scene.alive)
    if idx.size == 0:
        state.last_deltas = np.zeros(0)
        return grads
    state.E_v = float(np.mean(scene.v[idx]))
    state.grad_v = reg_gradient(state.E_v, config.T)
    delta_nominal = _round_lr(state, config) * abs(state.grad_v)
    if delta_nominal <= 0.0:
        state.last_deltas = np.zeros(idx.size)
        return grads

    uniform_shape = config.prior_mode == "finite" and state.phase == "finite_prior"
    if config.prior_mode == "strong":
        return strong_prior_pressure(scene, grads, state, config)
    if uniform_shape:
        deltas = np.full(idx.size, delta_nominal)
    else:
        ratio = _nominal_ratio(scene.v[idx], delta_nominal)
        deltas = equalized_deltas(scene.v[idx], ratio)
    grads.v[idx] += deltas
    state.last_deltas = deltas
    return grads


def strong_prior_pressure(scene: Scene, grads, state: SelectionState,
                          config: SelectionConfig):
    """Exempt each primitive with probability alpha; pressure the rest."""
    if config.prior_mode != "strong":
        raise ContractViolationError("strong-prior pressure outside strong mode")
    if state.rng is None:
        raise ContractViolationError("strong prior needs a random generator")
    idx = np.flatnonzero(scene.alive)
    if idx.size == 0:
        state.last_deltas = np.zeros(0)
        return grads
    state.E_v = float(np.mean(scene.v[idx]))
    state.grad_v = reg_gradient(state.E_v, config.T)
    delta_nominal = _round_lr(state, config) * abs(state.grad_v)
    alpha = activate_opacity(scene.v[idx])
    exempt = state.rng.uniform(size=idx.size) < alpha
    ratio = _nominal_ratio(scene.v[idx], delta_nominal)
    deltas = equalized_deltas(scene.v[idx], ratio)
    deltas[exempt] = 0.0
    grads.v[idx] += deltas
    state.last_deltas = deltas
    return grads


def cull(scene: Scene, tau: float) -> Scene:
    """Remove primitives with alpha below the survival threshold."""
    idx = np.flatnonzero(scene.alive)
    dying = idx[activate_opacity(scene.v[idx]) < tau]
    if dying.size:
        scene.alive[dying] = False
        compact_scene(scene)
    return scene


def _cull_with_grads(scene: Scene, grads, tau: float) -> None:
    idx = np.flatnonzero(scene.alive)
    dying = idx[activate_opacity(scene.v[idx]) < tau]
    if dying.size == 0:
        return
    scene.alive[dying] = False
    keep = np.flatnonzero(scene.alive)
    compact_scene(scene)
    if grads is not None:
        grads.mean = grads.mean[keep]
        grads.log_scale = grads.log_scale[keep]
        grads.rotation = grads.rotation[keep]
        grads.v = grads.v[keep]
        grads.color = grads.color[keep]


def auto_lr_update(state: SelectionState, boundary_a: float, iteration: int,
                   config: SelectionConfig) -> SelectionState:
    """Track the preset curve: scale lr by the (clamped) opacity ratio."""
    if state.phase != "finite_prior":
        raise ContractViolationError(f"auto-lr update in phase {state.phase!r}")
    curve = state.target_curve(iteration, config)
    lo, hi = config.auto_clamp
    state.current_reg_lr *= float(np.clip(boundary_a / curve, lo, hi))
    return state


def _set_opacity_phase(scene: Scene, phase: str) -> None:
    if scene.opt is not None:
        optim_mod.set_opacity_lr_phase(scene.opt, phase)


def _enter(state: SelectionState, phase: str) -> None:
    state.phase = phase
    state.iters_in_phase = 0


def _enter_recovery(scene: Scene, state: SelectionState, iteration: int) -> None:
    state.completed_at = iteration
    _set_opacity_phase(scene, "recovered")
    _enter(state, "recovery")


def _one_shot_prune(scene: Scene, grads, state: SelectionState,
                    weights: np.ndarray | None) -> None:
    """Deadline fallback: drop to budget by ascending alpha, ties by weight."""
    idx = np.flatnonzero(scene.alive)
    excess = idx.size - state.budget
    if excess > 0:
        a = activate_opacity(scene.v[idx])
        # weights may be stale if a cull compacted rows this same tick
        if weights is not None and weights.shape[0] == scene.n_total:
            w = weights[idx]
        else:
            w = np.zeros(idx.size)
        order = np.lexsort((w, a))
        scene.alive[idx[order[:excess]]] = False
        keep = np.flatnonzero(scene.alive)
        compact_scene(scene)
        if grads is not None:
            grads.mean = grads.mean[keep]
            grads.log_scale = grads.log_scale[keep]
            grads.rotation = grads.rotation[keep]
            grads.v = grads.v[keep]
            grads.color = grads.color[keep]
    state.one_shot_used = True


def selection_tick(scene: Scene, grads, state: SelectionState,
                   config: SelectionConfig, iteration: int,
                   weights: np.ndarray | None = None) -> SelectionState:
    """Advance the selection machine by one training iteration.

    Must run after the rendering backward pass and before the optimizer
    step, since pressure rides the gradient buffer.  Below start_iter this
    is a no-op.  ``weights`` (accumulated render weight) feeds the one-shot
    tie-break.
    """
    if state.phase == "inactive":
        if iteration < config.start_iter:
            return state
        state.budget = config.resolve_budget(scene.n_alive)
        state.current_reg_lr = config.reg_lr
        state.curve_alpha0 = boundary_alpha(scene, state.budget)
        state.curve_start = iteration
        _set_opacity_phase(scene, "selecting")
        _enter(state, "prefree")
        if scene.n_alive <= state.budget:
            _enter_recovery(scene, state, iteration)
            state.iters_in_phase += 1
            return state

    if state.phase == "done":
        return state

    if state.phase == "prefree" and state.iters_in_phase >= config.prefree_iters:
        _enter(state, "finite_prior")

    if state.phase in ("prefree", "finite_prior"):
        idx = np.flatnonzero(scene.alive)
        state.E_v = float(np.mean(scene.v[idx])) if idx.size else 0.0
        state.grad_v = reg_gradient(state.E_v, config.T)
        if (iteration - config.start_iter) % config.interval_N == 0:
            if grads is not None:
                apply_pressure(scene, grads, state, config)
            _cull_with_grads(scene, grads, config.tau)
            if config.auto_lr and state.phase == "finite_prior":
                auto_lr_update(state, boundary_alpha(scene, state.budget),
                               iteration, config)
            if scene.n_alive <= state.budget:
                _enter_recovery(scene, state, iteration)
                state.iters_in_phase += 1
                return state
        if iteration >= config.latest_end_iter:
            _one_shot_prune(scene, grads, state, weights)
            _enter_recovery(scene, state, iteration)
    elif state.phase == "recovery":
        if state.iters_in_phase >= config.recovery_iters:
            _set_opacity_phase(scene, "normal")
            _enter(state, "done")
            return state

    state.iters_in_phase += 1
    return state
