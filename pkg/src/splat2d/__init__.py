"""2D gaussian-splat image fitting with natural-selection pruning.

A self-contained trainer that fits anisotropic 2D gaussians to an image by
differentiable alpha compositing, grows them by adaptive density control,
then prunes to a hard budget by letting a globally uniform opacity pressure
field compete with the rendering gradient: primitives the loss defends
survive, the rest decay below the cull threshold.
"""

from .core import (ContractViolationError, Gaussian2D, InvalidParameterError,
                   Scene, SelectionConfig, TrainReport, activate_opacity,
                   boundary_alpha, compact_scene, covariance_of,
                   inverse_opacity, scene_from_gaussians)
from .renderer import (GradientBuffer, LossOutput, RenderOutput, Viewport,
                       compute_loss, render, render_backward)
from .optimizer import LearningRates, OptState, init_optimizer, step
from .densify import DensifyConfig, DensifyState, densify_step, init_scene
from .selection import (SelectionState, apply_pressure, auto_lr_update, cull,
                        equalized_deltas, init_selection, reg_gradient,
                        selection_tick, strong_prior_pressure)
from .baselines import prune_by_opacity, prune_by_render_weight
from .metrics import decay_probe, psnr, ssim, ssim_and_grad
from .config import MODES, RunConfig, config_from_dict, load_config
from .checkpoint import load_checkpoint, save_checkpoint
from .harness import compare, emit_plots, load_image, run, save_image

__version__ = "0.1.0"

__all__ = [
    "ContractViolationError", "Gaussian2D", "InvalidParameterError", "Scene",
    "SelectionConfig", "TrainReport", "activate_opacity", "boundary_alpha",
    "compact_scene", "covariance_of", "inverse_opacity", "scene_from_gaussians",
    "GradientBuffer", "LossOutput", "RenderOutput", "Viewport", "compute_loss",
    "render", "render_backward",
    "LearningRates", "OptState", "init_optimizer", "step",
    "DensifyConfig", "DensifyState", "densify_step", "init_scene",
    "SelectionState", "apply_pressure", "auto_lr_update", "cull",
    "equalized_deltas", "init_selection", "reg_gradient", "selection_tick",
    "strong_prior_pressure",
    "prune_by_opacity", "prune_by_render_weight",
    "decay_probe", "psnr", "ssim", "ssim_and_grad",
    "MODES", "RunConfig", "config_from_dict", "load_config",
    "load_checkpoint", "save_checkpoint",
    "compare", "emit_plots", "load_image", "run", "save_image",
    "__version__",
]
