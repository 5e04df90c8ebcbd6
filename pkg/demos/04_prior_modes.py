"""Compare the three pressure shapes: finite prior, no prior, strong prior.

All three erode the population down to the same budget.  The difference
is who carries the decay: with the finite prior high-opacity primitives
decay relatively slower (the sigmoid shields them), with no prior every
primitive decays at the same relative rate, and with the strong prior
primitives are exempted outright with probability alpha.  The useful
signal to watch is how fast the survivors recover after completion.
"""

import numpy as np

from splat2d.config import config_from_dict
from splat2d.harness import read_log, run


def pressure_run(mode):
    cfg = config_from_dict({
        "target": "assets/chelsea_64.png",
        "out_dir": f"demo_out/prior_{mode}",
        "mode": mode,
        "seed": 0,
        "total_iters": 5000,
        "n0": 700,
        "densify": {"start_iter": 0, "end_iter": 0},
        "selection": {"T": -20.0, "reg_lr": 2e-4, "interval_N": 50,
                      "budget_frac": 0.25, "start_iter": 400,
                      "latest_end_iter": 3600, "recovery_iters": 1000,
                      "prefree_iters": 200},
    })
    return run(cfg), read_log(cfg.out_dir + "/log.csv")


for mode in ("ours", "ablation_no_prior", "ablation_strong_prior"):
    summary, rows = pressure_run(mode)
    done = summary["completed_at"]
    final_alpha = rows[-1]["mean_alpha"]

    # mean surviving opacity at the end of the recovery window, as a
    # fraction of where it finally lands
    after = [r for r in rows if done is not None and r["iteration"] >= done + 1000]
    if after:
        note = (f"recovered {100 * after[0]['mean_alpha'] / final_alpha:.0f}% "
                f"of final opacity in 1000 iters")
    else:
        note = "run ended inside the recovery window"

    print(f"{mode:>22s}: done {done}  final {summary['final_count']:3d}  "
          f"psnr {summary['psnr']:.2f} dB  {note}")
