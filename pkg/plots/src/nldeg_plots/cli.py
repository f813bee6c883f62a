"""Command line entry point: `nldeg-plots render --in OUT_DIR --figs ...`."""

import argparse
import sys

from .render import FIGURES, RenderError, render


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="nldeg-plots",
        description="Render PNG figures from solver artifact directories.")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render figures from one artifact dir")
    p.add_argument("--in", dest="in_dir", required=True,
                   help="artifact directory (must contain manifest.json)")
    p.add_argument("--figs", default="all",
                   help="'all' or comma-separated figure names "
                        f"({', '.join(FIGURES)})")
    args = ap.parse_args(argv)

    figs = None if args.figs == "all" else [
        s.strip() for s in args.figs.split(",") if s.strip()]
    try:
        results = render(args.in_dir, figs)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for r in results:
        if r.rendered:
            print(f"wrote {r.path}")
        else:
            print(f"note: {r.name}: {r.note}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
