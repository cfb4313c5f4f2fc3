"""Command-line entry point.

    snapreg run CONFIG.json [--seed N] [--steps N] [--out-dir DIR] [--tolerance T]
    snapreg fit DATA.csv [--out-dir DIR] [--tolerance T]
    snapreg demo petersen [--seed N] [--steps N] [--out-dir DIR] [--tolerance T]

Exit codes: 0 success, 1 validation or parse error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from snapreg.errors import SnapregError
from snapreg.experiment import PETERSEN_DEMO, ExperimentConfig, check_lines, fit_external, run, write_outputs

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--steps", type=int, help="override the number of steps")
    p.add_argument("--out-dir", help="override the output directory")
    p.add_argument("--tolerance", type=float, help="override the relative rank tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snapreg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("config")
    _add_overrides(p_run)

    p_fit = sub.add_parser("fit", help="fit a model to a trajectory CSV (one state per row)")
    p_fit.add_argument("data")
    p_fit.add_argument("--out-dir")
    p_fit.add_argument("--tolerance", type=float, default=None)

    p_demo = sub.add_parser("demo", help="run a bundled experiment")
    p_demo.add_argument("name", choices=["petersen"])
    _add_overrides(p_demo)
    return parser


def _run_config(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    cfg = cfg.with_overrides(
        seed=args.seed, steps=args.steps, out_dir=args.out_dir, rank_tolerance=args.tolerance
    )
    result = run(cfg)
    paths = write_outputs(result)
    for line in check_lines(result):
        print(line)
    for kind, path in paths.items():
        print(f"wrote {kind}: {path}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run_config(ExperimentConfig.load(args.config), args)
        if args.command == "demo":
            return _run_config(ExperimentConfig.from_dict(PETERSEN_DEMO), args)
        kwargs = {} if args.tolerance is None else {"rank_tolerance": args.tolerance}
        result, paths = fit_external(args.data, out_dir=args.out_dir, **kwargs)
        last = result.steps[-1]
        print(f"fitted n={result.estimate.shape[0]} from {last.k + 2} states; final rank {last.rank}, "
              f"residual {last.residual:.3e}")
        for kind, path in paths.items():
            print(f"wrote {kind}: {path}")
        return EXIT_OK
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SnapregError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
