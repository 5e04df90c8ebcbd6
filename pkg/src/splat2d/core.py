"""Domain types shared by every stage: primitives, scenes, configuration.

A scene is stored struct-of-arrays (one numpy array per parameter) so the
renderer and optimizer can operate on contiguous buffers.  ``Gaussian2D`` is
the single-primitive value type used at API boundaries and in tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np


class InvalidParameterError(ValueError):
    """A primitive parameter is outside its valid domain (NaN, inf, ...)."""


class ContractViolationError(RuntimeError):
    """An operation was called with inputs that break its preconditions."""


def activate_opacity(v):
    """Sigmoid activation mapping pre-activation opacity to (0, 1).

    Accepts a scalar or array.  Raises InvalidParameterError for non-finite
    input.
    """
    arr = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError("opacity pre-activation must be finite")
    # evaluate exp on the negative half-line only, for overflow safety
    e = np.exp(-np.abs(arr))
    out = np.where(arr >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    if np.isscalar(v) or np.ndim(v) == 0:
        return float(out)
    return out


def inverse_opacity(alpha):
    """Logit, the inverse of activate_opacity. alpha must lie in (0, 1)."""
    arr = np.asarray(alpha, dtype=np.float64)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise InvalidParameterError("opacity must lie strictly in (0, 1)")
    out = np.log(arr) - np.log1p(-arr)
    if np.isscalar(alpha) or np.ndim(alpha) == 0:
        return float(out)
    return out


@dataclass
class Gaussian2D:
    """One anisotropic 2D primitive in image (pixel) coordinates.

    mean      : (2,) position, x then y
    log_scale : (2,) log of per-axis standard deviation in pixels
    rotation  : angle in radians
    v         : pre-activation opacity; alpha = sigmoid(v)
    color     : (3,) RGB in [0, 1]
    layer     : scalar compositing key; smaller renders in front
    """

    mean: np.ndarray
    log_scale: np.ndarray
    rotation: float
    v: float
    color: np.ndarray
    layer: float = 0.0

    @property
    def alpha(self) -> float:
        return activate_opacity(self.v)


def covariance_of(g: Gaussian2D) -> np.ndarray:
    """2x2 covariance R S S^T R^T of a primitive.

    Symmetric positive definite for finite parameters; eigenvalues are
    exp(2 * log_scale).
    """
    params = np.concatenate([np.ravel(g.log_scale), [g.rotation]])
    if not np.all(np.isfinite(params)):
        raise InvalidParameterError("covariance parameters must be finite")
    c, s = np.cos(g.rotation), np.sin(g.rotation)
    v1, v2 = np.exp(2.0 * np.asarray(g.log_scale, dtype=np.float64))
    # Off-diagonal written once so the result is symmetric to the last ulp.
    off = c * s * (v1 - v2)
    return np.array([[c * c * v1 + s * s * v2, off],
                     [off, s * s * v1 + c * c * v2]])


def covariance_arrays(log_scale: np.ndarray, rotation: np.ndarray) -> np.ndarray:
    """Vectorized covariance for N primitives; returns (N, 2, 2)."""
    c, s = np.cos(rotation), np.sin(rotation)
    v1 = np.exp(2.0 * log_scale[:, 0])
    v2 = np.exp(2.0 * log_scale[:, 1])
    cov = np.empty((rotation.shape[0], 2, 2))
    cov[:, 0, 0] = c * c * v1 + s * s * v2
    cov[:, 0, 1] = c * s * (v1 - v2)
    cov[:, 1, 0] = cov[:, 0, 1]
    cov[:, 1, 1] = s * s * v1 + c * c * v2
    return cov


@dataclass
class Scene:
    """The full primitive set plus aligned optimizer state.

    All per-primitive arrays share the row order; any compaction must slice
    every one of them (and the optimizer moments) with the same index set.
    """

    mean: np.ndarray        # (N, 2) float64
    log_scale: np.ndarray   # (N, 2)
    rotation: np.ndarray    # (N,)
    v: np.ndarray           # (N,)
    color: np.ndarray       # (N, 3)
    layer: np.ndarray       # (N,) compositing keys, ascending = front to back
    alive: np.ndarray       # (N,) bool
    opt: Optional[object] = None   # OptimState, sliced via .take(idx)
    iteration: int = 0

    @property
    def n_total(self) -> int:
        return self.v.shape[0]

    @property
    def n_alive(self) -> int:
        return int(np.count_nonzero(self.alive))

    def alpha(self) -> np.ndarray:
        return activate_opacity(self.v)

    def gaussian(self, i: int) -> Gaussian2D:
        return Gaussian2D(
            mean=self.mean[i].copy(),
            log_scale=self.log_scale[i].copy(),
            rotation=float(self.rotation[i]),
            v=float(self.v[i]),
            color=self.color[i].copy(),
            layer=float(self.layer[i]),
        )

    def copy(self) -> "Scene":
        return Scene(
            mean=self.mean.copy(),
            log_scale=self.log_scale.copy(),
            rotation=self.rotation.copy(),
            v=self.v.copy(),
            color=self.color.copy(),
            layer=self.layer.copy(),
            alive=self.alive.copy(),
            opt=self.opt.copy() if self.opt is not None else None,
            iteration=self.iteration,
        )


def scene_from_gaussians(gaussians) -> Scene:
    """Build a Scene from an iterable of Gaussian2D."""
    gs = list(gaussians)
    n = len(gs)
    scene = Scene(
        mean=np.array([g.mean for g in gs], dtype=np.float64).reshape(n, 2),
        log_scale=np.array([g.log_scale for g in gs], dtype=np.float64).reshape(n, 2),
        rotation=np.array([g.rotation for g in gs], dtype=np.float64),
        v=np.array([g.v for g in gs], dtype=np.float64),
        color=np.array([g.color for g in gs], dtype=np.float64).reshape(n, 3),
        layer=np.array([g.layer for g in gs], dtype=np.float64),
        alive=np.ones(n, dtype=bool),
    )
    return scene


def compact_scene(scene: Scene) -> Scene:
    """Drop dead primitives, preserving survivor order and optimizer rows.

    Rendering output is unchanged because dead primitives never participate
    in compositing.
    """
    if scene.alive.all():
        return scene
    idx = np.flatnonzero(scene.alive)
    scene.mean = scene.mean[idx]
    scene.log_scale = scene.log_scale[idx]
    scene.rotation = scene.rotation[idx]
    scene.v = scene.v[idx]
    scene.color = scene.color[idx]
    scene.layer = scene.layer[idx]
    scene.alive = np.ones(idx.shape[0], dtype=bool)
    if scene.opt is not None:
        scene.opt.take(idx)
    return scene


@dataclass
class SelectionConfig:
    """Every knob of the survival-pressure pruning stage."""

    T: float = -20.0             # regularization target on pre-activation opacity
    tau: float = 0.001           # survival threshold on alpha
    interval_N: int = 50         # iterations between pressure applications
    reg_lr: float = 3e-4         # gradient-field learning rate
    budget_B: int = 0            # target primitive count; 0 = resolve from budget_frac
    budget_frac: float = 0.25    # fallback: fraction of the count at selection start
    start_iter: int = 15000
    latest_end_iter: int = 23000 # one-shot fallback deadline
    recovery_iters: int = 1000
    opacity_lr_scale: float = 4.0
    prior_mode: str = "finite"   # finite | none | strong
    prefree_iters: int = 500     # early low-rate phase with equalized decay
    prefree_lr_factor: float = 0.25
    auto_lr: bool = False
    auto_target_iters: int = 6500   # target-curve endpoint, relative to start
    auto_clamp: tuple = (0.5, 2.0)  # per-interval multiplier bounds

    def validate(self):
        if not (0.0 < self.tau < 1.0):
            raise InvalidParameterError(f"tau must lie in (0, 1), got {self.tau}")
        if self.budget_B < 0:
            raise InvalidParameterError("budget_B must be >= 1 (or 0 for budget_frac)")
        if self.budget_B == 0 and not (0.0 < self.budget_frac <= 1.0):
            raise InvalidParameterError(f"budget_frac must lie in (0, 1], got {self.budget_frac}")
        if self.start_iter >= self.latest_end_iter:
            raise InvalidParameterError("start_iter must precede latest_end_iter")
        if self.opacity_lr_scale < 1.0:
            raise InvalidParameterError("opacity_lr_scale must be >= 1")
        if self.prior_mode not in ("finite", "none", "strong"):
            raise InvalidParameterError(f"unknown prior_mode {self.prior_mode!r}")
        return self

    def resolve_budget(self, n_alive: int) -> int:
        """Concrete primitive budget for a scene of the given size."""
        if self.budget_B > 0:
            return self.budget_B
        return max(1, int(round(self.budget_frac * n_alive)))


@dataclass
class TrainReport:
    """One log record, emitted once per pressure interval."""

    iteration: int
    l_render: float
    l_reg: float
    alive_count: int
    mean_alpha: float
    boundary_alpha: float   # alpha of the budget-th ranked primitive
    current_reg_lr: float
    phase: str

    CSV_FIELDS = (
        "iteration", "l_render", "l_reg", "alive_count",
        "mean_alpha", "boundary_alpha", "current_reg_lr", "phase",
    )

    def csv_row(self) -> str:
        return ",".join(
            repr(getattr(self, f)) if isinstance(getattr(self, f), float)
            else str(getattr(self, f))
            for f in self.CSV_FIELDS
        )


def boundary_alpha(scene: Scene, budget: int) -> float:
    """Alpha of the budget-th primitive ranked by descending alpha.

    Falls back to the smallest alive alpha when fewer than ``budget``
    primitives remain; 0.0 for an empty scene.
    """
    a = scene.alpha()[scene.alive]
    if a.size == 0:
        return 0.0
    a = np.sort(a)[::-1]
    k = min(max(budget, 1), a.size) - 1
    return float(a[k])
