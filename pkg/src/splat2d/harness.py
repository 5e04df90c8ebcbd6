"""Experiment runner: wiring, schedule, logging, artifacts.

A run fits a scene of 2D primitives to one or more target images through
three stages: densification (growth), a mode-dependent pruning stage, and
fine-tuning to the final iteration.  Per-interval progress lands in
``log.csv``, the final state in ``checkpoint.bin`` (+ JSON sidecar), the
final render in ``render.png``, and the quality numbers in
``summary.json``.  Everything in summary.json and the checkpoint is a pure
function of (config, seed); wall-clock time goes to ``run_info.json`` so
rerun artifacts stay bitwise comparable.
"""

import csv
import dataclasses
import json
import time
from pathlib import Path

import numpy as np
from PIL import Image

from . import baselines as baselines_mod
from .config import MODE_PRIOR, RunConfig
from .core import (ContractViolationError, InvalidParameterError, TrainReport,
                   boundary_alpha)
from .densify import DensifyState, densify_step, init_scene
from .checkpoint import save_checkpoint
from .metrics import SsimReference, psnr, ssim
from .optimizer import init_optimizer, step as opt_step
from .renderer import Viewport, compute_loss, render, render_backward
from .selection import init_selection, selection_tick

SELECTION_MODES = ("ours", "ablation_no_prior", "ablation_strong_prior")
BASELINE_MODES = ("baseline_opacity", "baseline_render")


def srgb_to_linear(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.where(x <= 0.04045, x / 12.92, ((x + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(x: np.ndarray) -> np.ndarray:
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    return np.where(x <= 0.0031308, x * 12.92, 1.055 * x ** (1 / 2.4) - 0.055)


def load_image(path) -> np.ndarray:
    """8-bit sRGB PNG -> linear float64 (H, W, 3) in [0, 1]."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except (OSError, ValueError) as e:
        raise InvalidParameterError(f"cannot read image {path}: {e}") from e
    return srgb_to_linear(arr)


def save_image(path, linear: np.ndarray) -> None:
    u8 = np.round(linear_to_srgb(linear) * 255.0).astype(np.uint8)
    Image.fromarray(u8).save(path)


def build_views(cfg: RunConfig, targets, rng: np.random.Generator):
    """Full view per target, plus deterministic crop views of the first.

    Targets are wrapped in SsimReference so their window moments are
    computed once, not every iteration.
    """
    h, w = targets[0].shape[:2]
    views = [(Viewport(width=w, height=h), SsimReference(t)) for t in targets]
    vw = max(1, int(round(w * cfg.view_frac)))
    vh = max(1, int(round(h * cfg.view_frac)))
    for _ in range(cfg.crop_views):
        ox = int(rng.integers(0, w - vw + 1))
        oy = int(rng.integers(0, h - vh + 1))
        crop = np.ascontiguousarray(targets[0][oy:oy + vh, ox:ox + vw])
        views.append((Viewport(width=vw, height=vh, origin_x=ox, origin_y=oy),
                      SsimReference(crop)))
    return views


def _accumulate_weights(scene, views) -> np.ndarray:
    acc = np.zeros(scene.n_total)
    for vp, _ in views:
        acc += render(scene, vp).weight
    return acc


def _report(scene, sel_state, sel_cfg, loss, it) -> TrainReport:
    idx = np.flatnonzero(scene.alive)
    e_v = float(np.mean(scene.v[idx])) if idx.size else 0.0
    budget = sel_state.budget if sel_state.budget > 0 else sel_cfg.resolve_budget(scene.n_alive)
    return TrainReport(iteration=it,
                       l_render=loss.total,
                       l_reg=(e_v - sel_cfg.T) ** 2,
                       alive_count=scene.n_alive,
                       mean_alpha=float(np.mean(scene.alpha()[idx])) if idx.size else 0.0,
                       boundary_alpha=boundary_alpha(scene, budget),
                       current_reg_lr=sel_state.current_reg_lr,
                       phase=sel_state.phase)


def run(cfg: RunConfig) -> dict:
    """Execute one training run; returns the summary dict it also writes."""
    cfg.validate()
    t_start = time.perf_counter()
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(cfg.seed)
    targets = [load_image(p) for p in cfg.targets]
    shape0 = targets[0].shape
    for p, t in zip(cfg.targets, targets):
        if t.shape != shape0:
            raise InvalidParameterError(
                f"target {p} has shape {t.shape}, expected {shape0}")
    views = build_views(cfg, targets, rng)

    scene = init_scene(targets[0], cfg.n0, rng)
    init_optimizer(scene, lrs=dataclasses.replace(cfg.lr),
                   opacity_boost=cfg.selection.opacity_lr_scale)

    sel_cfg = dataclasses.replace(
        cfg.selection, prior_mode=MODE_PRIOR.get(cfg.mode, cfg.selection.prior_mode))
    sel_state = init_selection(sel_cfg, rng)
    dens_cfg = dataclasses.replace(cfg.densify)
    dens_cfg.end_iter = min(dens_cfg.end_iter, sel_cfg.start_iter)
    if dens_cfg.max_total <= 0:
        dens_cfg.max_total = 3 * sel_cfg.budget_B if sel_cfg.budget_B > 0 else 120000
    dens_state = DensifyState(scene.n_total)

    baseline_budget = None
    selecting = cfg.mode in SELECTION_MODES

    log_path = out_dir / "log.csv"
    with open(log_path, "w") as log_fh:
        log_fh.write(",".join(TrainReport.CSV_FIELDS) + "\n")
        last_logged = -1
        for it in range(cfg.total_iters):
            scene.iteration = it
            if cfg.lr_decay < 1.0 and it >= cfg.anneal_start \
                    and cfg.total_iters > cfg.anneal_start:
                frac = (it - cfg.anneal_start) / (cfg.total_iters - cfg.anneal_start)
                scene.opt.anneal = cfg.lr_decay ** frac
            vp, tgt = views[it % len(views)]
            out = render(scene, vp)
            loss = compute_loss(out.image, tgt)
            if not np.isfinite(loss.total):
                save_checkpoint(out_dir / "checkpoint_abort.bin", scene,
                                meta={"mode": cfg.mode, "seed": cfg.seed,
                                      "aborted_at": it})
                raise ContractViolationError(f"non-finite loss at iteration {it}")
            grads = render_backward(scene, out, loss.d_image)

            if selecting and it >= sel_cfg.start_iter:
                selection_tick(scene, grads, sel_state, sel_cfg, it,
                               weights=out.weight)

            in_densify = dens_cfg.start_iter <= it < dens_cfg.end_iter
            if in_densify:
                dens_state.observe(scene, grads, out)

            opt_step(scene, grads, scene.opt)

            if in_densify and it > dens_cfg.start_iter \
                    and (it - dens_cfg.start_iter) % dens_cfg.interval == 0:
                densify_step(scene, dens_state, dens_cfg, rng)

            if cfg.mode in BASELINE_MODES and it == sel_cfg.start_iter:
                baseline_budget = sel_cfg.resolve_budget(scene.n_alive)
                if cfg.mode == "baseline_opacity":
                    baselines_mod.prune_by_opacity(scene, baseline_budget,
                                                   stochastic=True, rng=rng)
                else:
                    weights = _accumulate_weights(scene, views)
                    baselines_mod.prune_by_render_weight(scene, weights,
                                                         baseline_budget,
                                                         stochastic=True, rng=rng)
                dens_state.reset(scene.n_total)

            if it % sel_cfg.interval_N == 0 or it == cfg.total_iters - 1:
                log_fh.write(_report(scene, sel_state, sel_cfg, loss, it).csv_row() + "\n")
                log_fh.flush()
                last_logged = it

            if cfg.checkpoint_every > 0 and it > 0 and it % cfg.checkpoint_every == 0:
                save_checkpoint(out_dir / f"checkpoint_{it:06d}.bin", scene,
                                meta={"mode": cfg.mode, "seed": cfg.seed})

            if cfg.stop_on_completion and sel_state.completed_at is not None:
                break

    scene.iteration = cfg.total_iters
    full_vp, primary_ref = views[0]
    primary = primary_ref.image
    final = render(scene, full_vp)
    save_image(out_dir / "render.png", final.image)
    save_checkpoint(out_dir / "checkpoint.bin", scene,
                    meta={"mode": cfg.mode, "seed": cfg.seed,
                          "phase": sel_state.phase})

    budget = None
    if selecting and sel_state.budget > 0:
        budget = sel_state.budget
    elif baseline_budget is not None:
        budget = baseline_budget

    summary = {
        "mode": cfg.mode,
        "seed": cfg.seed,
        "reproducible": cfg.reproducible,
        "targets": [str(p) for p in cfg.targets],
        "total_iters": cfg.total_iters,
        "final_count": scene.n_alive,
        "budget": budget,
        "psnr": psnr(final.image, primary),
        "ssim": ssim(final.image, primary),
        "l1": float(np.mean(np.abs(final.image - primary))),
        "completed_at": sel_state.completed_at,
        "one_shot_used": sel_state.one_shot_used,
        "final_phase": sel_state.phase,
        "final_reg_lr": sel_state.current_reg_lr,
        "config": cfg.to_dict(),
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    (out_dir / "run_info.json").write_text(json.dumps(
        {"wall_time_s": time.perf_counter() - t_start,
         "log_rows": sum(1 for _ in open(log_path)) - 1,
         "last_logged_iteration": last_logged}, indent=1))
    return summary


def read_log(log_path) -> list:
    """Parse a log.csv into a list of dicts with numeric fields converted."""
    rows = []
    with open(log_path) as fh:
        for raw in csv.DictReader(fh):
            row = dict(raw)
            row["iteration"] = int(raw["iteration"])
            row["alive_count"] = int(raw["alive_count"])
            for k in ("l_render", "l_reg", "mean_alpha", "boundary_alpha",
                      "current_reg_lr"):
                row[k] = float(raw[k])
            rows.append(row)
    return rows


def emit_plots(log_path, out_dir) -> list:
    """Render the training curves of a log.csv to PNG; returns written paths."""
    rows = read_log(log_path)
    if len(rows) < 2:
        raise ContractViolationError(f"need at least 2 log rows, got {len(rows)}")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    it = [r["iteration"] for r in rows]
    fig, axes = plt.subplots(2, 2, figsize=(11, 7))
    panels = (("alive_count", "surviving primitives"),
              ("mean_alpha", "mean opacity"),
              ("boundary_alpha", "boundary opacity"))
    for ax, (key, label) in zip(axes.flat, panels):
        ax.plot(it, [r[key] for r in rows])
        ax.set_xlabel("iteration")
        ax.set_title(label)
        ax.grid(True, alpha=0.3)
    ax = axes.flat[3]
    ax.plot(it, [r["l_render"] for r in rows], label="render loss")
    ax.set_xlabel("iteration")
    ax.set_title("loss")
    ax.grid(True, alpha=0.3)
    ax2 = ax.twinx()
    ax2.plot(it, [r["l_reg"] for r in rows], color="tab:orange", label="reg loss")
    fig.tight_layout()
    curves = out_dir / "curves.png"
    fig.savefig(curves, dpi=110)
    plt.close(fig)

    mirror = out_dir / "curves.csv"
    with open(log_path) as src, open(mirror, "w") as dst:
        dst.write(src.read())
    return [curves, mirror]


def compare(run_dirs, out_csv) -> Path:
    """Collect per-run summaries into one CSV table."""
    rows = []
    for d in run_dirs:
        summary_path = Path(d) / "summary.json"
        if not summary_path.is_file():
            raise ContractViolationError(f"no summary.json under {d}")
        s = json.loads(summary_path.read_text())
        rows.append({"run": Path(d).name, "mode": s["mode"], "seed": s["seed"],
                     "final_count": s["final_count"], "budget": s["budget"],
                     "psnr": s["psnr"], "ssim": s["ssim"],
                     "completed_at": s["completed_at"],
                     "one_shot_used": s["one_shot_used"]})
    rows.sort(key=lambda r: (r["mode"], r["seed"], r["run"]))
    out_csv = Path(out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    fields = ["run", "mode", "seed", "final_count", "budget", "psnr", "ssim",
              "completed_at", "one_shot_used"]
    with open(out_csv, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    return out_csv
