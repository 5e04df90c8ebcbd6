"""Command line entry points: train, plot, compare."""

import argparse
import sys

from .config import MODES, load_config
from .core import ContractViolationError, InvalidParameterError
from .harness import compare, emit_plots, run


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splat2d",
        description="2D gaussian-splat image fitting with survival-pressure pruning")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a training configuration")
    p_train.add_argument("--config", required=True, help="path to .toml or .json config")
    p_train.add_argument("--mode", choices=MODES, help="override config mode")
    p_train.add_argument("--seed", type=int, help="override config seed")
    p_train.add_argument("--out", help="override output directory")
    p_train.add_argument("--reproducible", action="store_true",
                         help="record the determinism contract in the summary")

    p_plot = sub.add_parser("plot", help="plot curves from a run log")
    p_plot.add_argument("--log", required=True, help="path to log.csv")
    p_plot.add_argument("--out", required=True, help="output directory for plots")

    p_cmp = sub.add_parser("compare", help="tabulate summaries of several runs")
    p_cmp.add_argument("--runs", nargs="+", required=True, help="run directories")
    p_cmp.add_argument("--out", required=True, help="output table path (.csv)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "train":
            cfg = load_config(args.config)
            if args.mode is not None:
                cfg.mode = args.mode
            if args.seed is not None:
                cfg.seed = args.seed
            if args.out is not None:
                cfg.out_dir = args.out
            if args.reproducible:
                cfg.reproducible = True
            summary = run(cfg)
            print(f"mode={summary['mode']} seed={summary['seed']} "
                  f"count={summary['final_count']} psnr={summary['psnr']:.3f} "
                  f"ssim={summary['ssim']:.4f} -> {cfg.out_dir}")
        elif args.command == "plot":
            for path in emit_plots(args.log, args.out):
                print(path)
        elif args.command == "compare":
            print(compare(args.runs, args.out))
    except (InvalidParameterError, ContractViolationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
