#!/usr/bin/env python3
"""Run the full artifact pipeline (validate, solve, barriers, verify,
convergence) for one config file into one output directory.

Example:
    python3 scripts/run_pipeline.py --config configs/regression_coarse.cfg \
        --out out/regression
"""

import argparse
import sys
import time

from nldeg.cli import main as cli_main


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--levels", type=int, default=3,
                    help="grid levels for the convergence study")
    ap.add_argument("--skip-convergence", action="store_true")
    args = ap.parse_args(argv)

    stages = [
        ["validate", "--config", args.config, "--out", args.out],
        ["solve", "--config", args.config, "--out", args.out],
        ["barriers", "--config", args.config, "--out", args.out],
        ["verify", "--config", args.config, "--out", args.out],
    ]
    if not args.skip_convergence:
        stages.append(["convergence", "--config", args.config,
                       "--out", args.out, "--levels", str(args.levels)])

    for stage in stages:
        t0 = time.perf_counter()
        code = cli_main(stage)
        dt = time.perf_counter() - t0
        print(f"{stage[0]:<12} exit {code}  ({dt:.1f} s)")
        if code != 0:
            return code
    print(f"artifacts written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
