#!/usr/bin/env python3
"""Solve the stiff three-slope family by continuation and print the trace.

The nonlinearity has slopes 1e5 / 1 / 1e-5, so a direct damped iteration is
hopeless; the solver regularizes the slope from below by eps_k, solves each
leg, and halves eps_k until successive legs agree to tol_cont.  The printed
gap column should shrink geometrically (factor ~2 per leg).
"""

import argparse
import sys

import numpy as np

import nldeg as nd
from nldeg.solver import SolverConfig, solve_degenerate


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=0.05)
    ap.add_argument("--tol-cont", type=float, default=1e-4)
    ap.add_argument("--eps0", type=float, default=None,
                    help="override the first regularization floor")
    args = ap.parse_args(argv)

    phi = nd.make_boundary_datum("smoothed_cone", slope=8.0, n=1)
    F = nd.make_nonlinearity("smooth_piecewise_slopes",
                             s1=1e5, s2=1.0, s3=1e-5, a=0.01, b=100.0)
    spec = nd.ProblemSpec(n=1, sigma=1.5, F=F,
                          g=nd.make_forcing("linear_cubic", mu=1.0),
                          phi=phi, R_dom=20.0, h=args.h, rho_tail=10.0)
    W = nd.build_kernel_weights(1, 1.5, args.h, 10.0)
    cfg = SolverConfig(tol_residual=1e-8, tol_cont=args.tol_cont)
    if args.eps0 is not None:
        from dataclasses import replace
        cfg = replace(cfg, eps0=args.eps0)

    rep = solve_degenerate(spec, W, cfg)
    print(f"{'k':>3} {'eps':>12} {'gap':>12} {'iters':>6}")
    for t in rep.continuation_trace:
        gap = "" if not np.isfinite(t["gap"]) else f"{t['gap']:.4e}"
        print(f"{t['k']:>3} {t['eps']:>12.4e} {gap:>12} {t['iters']:>6}")
    u0 = float(rep.u.values[rep.u.center_index])
    phi0 = float(spec.phi.eval(np.zeros((1, 1)))[0])
    print(f"converged: {rep.converged}; u(0) - phi(0) = {u0 - phi0:.12f}")
    return 0 if rep.converged else 2


if __name__ == "__main__":
    sys.exit(run())
