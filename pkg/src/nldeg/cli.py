"""Command-line entry point orchestrating the pipeline.

Subcommands: validate, solve, barriers, verify, envelope-demo,
convergence, oracle.  Every run writes its artifacts under --out plus a
manifest.json listing each emitted file with a sha256 content hash.
Exit codes: 0 success, 1 validation/config failure, 2 solver failure,
3 verify-suite failure.

Artifacts are deterministic for a given config: volatile quantities
(wall time) are reported on stderr only, never in hashed files.  The
environment variable NLDEG_THREADS caps BLAS worker parallelism
(0 or unset = automatic).
"""

from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import os
import sys
import time

import numpy as np

from .barriers import (build_supersolution_concave,
                       build_supersolution_superlinear, check_subsolution_phi,
                       cone_decay_check)
from .config import ConfigError, load_problem
from .envelopes import inf_envelope, sup_envelope
from .model import validate_problem
from .operator import residual_field
from .quadrature import build_kernel_weights
from .solver import SolverConfig, solve
from . import verify as verify_mod

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_VERIFY = 3


# ---------------------------------------------------------------------------
# artifact plumbing


def _fmt(v) -> str:
    """Shortest round-trip decimal for floats; plain str otherwise."""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: str, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path: str, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(out_dir: str, names):
    entries = {}
    for name in sorted(names):
        with open(os.path.join(out_dir, name), "rb") as fh:
            entries[name] = hashlib.sha256(fh.read()).hexdigest()
    _write_json(os.path.join(out_dir, "manifest.json"), {"files": entries})


@contextlib.contextmanager
def _thread_limit():
    """Apply the NLDEG_THREADS cap to BLAS pools where possible."""
    cap = int(os.environ.get("NLDEG_THREADS", "0") or "0")
    if cap <= 0:
        yield
        return
    try:
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=cap):
            yield
    except ImportError:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(cap)
        yield


class _Emitter:
    def __init__(self, out_dir: str):
        os.makedirs(out_dir, exist_ok=True)
        self.out_dir = out_dir
        self.names = []

    def csv(self, name, header, rows):
        _write_csv(os.path.join(self.out_dir, name), header, rows)
        self.names.append(name)

    def json(self, name, obj):
        _write_json(os.path.join(self.out_dir, name), obj)
        self.names.append(name)

    def manifest(self):
        _write_manifest(self.out_dir, self.names)


def _point_columns(n: int):
    return ["x"] if n == 1 else ["x0", "x1"]


def _solution_rows(u, phi_vals, resid_vals):
    pts = u.points().reshape(-1, u.n)
    uv = u.values.ravel()
    pv = phi_vals.ravel()
    rv = resid_vals.ravel()
    for i in range(len(uv)):
        yield (*[float(c) for c in pts[i]], float(uv[i]), float(pv[i]),
               float(uv[i] - pv[i]), float(rv[i]))


# ---------------------------------------------------------------------------
# subcommands


def _load(args):
    spec = load_problem(args.config)
    return spec


def _weights(spec):
    return build_kernel_weights(spec.n, spec.sigma, spec.h, spec.rho_tail)


def _solver_config(args) -> SolverConfig:
    kw = {}
    if getattr(args, "tol", None) is not None:
        kw["tol_residual"] = args.tol
    if getattr(args, "max_iters", None) is not None:
        kw["max_iters"] = args.max_iters
    return SolverConfig(**kw)


def cmd_validate(args) -> int:
    spec = _load(args)
    report = validate_problem(spec)
    em = _Emitter(args.out)
    em.json("validation.json", report.as_dict())
    em.manifest()
    if not report.all_passed:
        for res in report.failed():
            print(f"validation failed: {res.cond_id}: {res.detail}",
                  file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def _validated_spec(args, em):
    spec = _load(args)
    report = validate_problem(spec)
    em.json("validation.json", report.as_dict())
    if not report.all_passed:
        em.manifest()
        for res in report.failed():
            print(f"validation failed: {res.cond_id}: {res.detail}",
                  file=sys.stderr)
        return None
    return spec


def cmd_solve(args) -> int:
    em = _Emitter(args.out)
    spec = _validated_spec(args, em)
    if spec is None:
        return EXIT_VALIDATION
    W = _weights(spec)
    t0 = time.time()
    try:
        rep = solve(spec, W, _solver_config(args))
    except (RuntimeError, FloatingPointError) as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        em.manifest()
        return EXIT_SOLVER
    print(f"solved in {rep.iterations} iterations, "
          f"{time.time() - t0:.1f}s wall, final residual "
          f"{rep.final_residual:.3e}", file=sys.stderr)

    phi_grid = spec.phi_grid()
    resid = residual_field(rep.u, spec, W)
    em.csv("solution.csv",
           _point_columns(spec.n) + ["u", "phi", "u_minus_phi", "residual"],
           _solution_rows(rep.u, phi_grid.values, resid.values))
    em.csv("trace.csv", ["k", "eps", "gap", "iters"],
           [(t["k"], t["eps"],
             (t["gap"] if np.isfinite(t["gap"]) else ""), t["iters"])
            for t in rep.continuation_trace])
    em.csv("residuals.csv", ["iter", "residual"],
           list(enumerate(float(r) for r in rep.residual_history)))
    report = {
        "iterations": rep.iterations,
        "converged": rep.converged,
        "final_residual": rep.final_residual,
        "sandwich_violations": rep.sandwich_violations,
        "clip_activations": rep.clip_activations,
        "continuation_trace": rep.continuation_trace,
        "barrier": (None if rep.barrier is None else {
            "kind": rep.barrier.kind, "M": rep.barrier.M,
            "exponent": rep.barrier.exponent,
            "certificate": rep.barrier.certificate.as_dict()}),
    }
    em.json("report.json", report)
    if rep.barrier is not None:
        bp = rep.barrier.profile
        em.csv("barrier_profile.csv",
               _point_columns(spec.n) + ["phi", "ubar"],
               [(*[float(c) for c in p], float(pv), float(bv))
                for p, pv, bv in zip(bp.points().reshape(-1, spec.n),
                                     phi_grid.values.ravel(),
                                     bp.values.ravel())])
    em.manifest()
    return EXIT_OK


def cmd_barriers(args) -> int:
    em = _Emitter(args.out)
    spec = _validated_spec(args, em)
    if spec is None:
        return EXIT_VALIDATION
    W = _weights(spec)
    sub = check_subsolution_phi(spec, W)
    try:
        if spec.F.concave_on_positive and spec.n > spec.sigma:
            bar = build_supersolution_concave(spec, W)
        else:
            bar = build_supersolution_superlinear(
                spec, W, require_superlinear=spec.g.superlinear)
    except (RuntimeError, ValueError) as exc:
        print(f"barrier construction failed: {exc}", file=sys.stderr)
        em.manifest()
        return EXIT_SOLVER
    decay = cone_decay_check(spec.phi, spec.sigma, W)
    cert = {
        "kind": bar.kind,
        "M": bar.M,
        "p_or_tau": bar.exponent,
        "max_residual": bar.certificate.extremum,
        "worst_node": list(bar.certificate.worst_node),
        "subsolution": sub.as_dict(),
        "ray_fit": {k: v for k, v in decay.items()
                    if k not in ("radii", "values")},
    }
    em.json("barrier_certificate.json", cert)
    em.csv("conedecay.csv", ["radius", "value"],
           list(zip(decay["radii"], decay["values"])))
    phi_grid = spec.phi_grid()
    em.csv("barrier_profile.csv",
           _point_columns(spec.n) + ["phi", "ubar"],
           [(*[float(c) for c in p], float(pv), float(bv))
            for p, pv, bv in zip(
                bar.profile.points().reshape(-1, spec.n),
                phi_grid.values.ravel(), bar.profile.values.ravel())])
    em.manifest()
    if not (sub.passed and bar.certificate.passed):
        return EXIT_VERIFY
    return EXIT_OK


def cmd_verify(args) -> int:
    em = _Emitter(args.out)
    spec = _validated_spec(args, em)
    if spec is None:
        return EXIT_VALIDATION
    W = _weights(spec)
    cfg = _solver_config(args)
    try:
        bar = build_supersolution_superlinear(
            spec, W, require_superlinear=spec.g.superlinear)
        rep = solve(spec, W, cfg)
    except (RuntimeError, FloatingPointError) as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        em.manifest()
        return EXIT_SOLVER

    failures = []
    checks = {}

    # comparison principle on certified pairs
    comp_rows = []
    try:
        c1 = verify_mod.comparison_test(rep.u, bar.profile, spec, W,
                                        tol=10.0 * cfg.tol_residual)
        c2 = verify_mod.comparison_test(spec.phi_grid(), rep.u, spec, W,
                                        tol=10.0 * cfg.tol_residual)
        comp_rows = [("solution_vs_ubar", *c1.as_dict().values()),
                     ("phi_vs_solution", *c2.as_dict().values())]
        checks["comparison"] = {"solution_vs_ubar": c1.as_dict(),
                                "phi_vs_solution": c2.as_dict()}
        if not (c1.passed and c2.passed):
            failures.append("comparison")
    except ValueError as exc:
        checks["comparison"] = {"error": str(exc)}
        failures.append("comparison")
    em.csv("comparison.csv",
           ["pair", "passed", "max_gap", "tolerance", "sub_margin",
            "super_margin"], comp_rows)

    # Holder seminorm
    beta = 0.5 * (2.0 - spec.sigma)
    est, table = verify_mod.holder_seminorm(rep.u, beta)
    em.csv("holder.csv", ["scale", "max_quotient"], table)
    checks["holder"] = {"beta": beta, "seminorm": est}

    # transformed equation
    tr = verify_mod.transformed_equation_check(rep.u, spec, W)
    checks["transformed_equation"] = tr
    if tr["max_defect"] > 10.0 * cfg.tol_residual + tr["consistency_term"]:
        failures.append("transformed_equation")

    # difference-quotient probe on w = u - phi
    w = rep.u.with_values(rep.u.values - spec.phi_grid().values)
    probe = verify_mod.difference_quotient_probe(
        w, beta, [2 * spec.h, 4 * spec.h, 8 * spec.h, 16 * spec.h])
    em.csv("quotients.csv", ["scale", "max_quotient"], probe["table"])
    checks["difference_quotients"] = {k: v for k, v in probe.items()
                                      if k != "table"}

    # independent linear-case oracle at the config sigma
    oracle = verify_mod.linear_case_oracle_test(spec.sigma, args.oracle_h)
    em.csv("oracle.csv", ["x", "computed", "exact", "rel_error"],
           [(p["x"], p["computed"], p["exact"], p["rel_error"])
            for p in oracle["per_point"]])
    checks["oracle"] = {k: v for k, v in oracle.items() if k != "per_point"}
    if oracle["max_rel_error"] > 1e-3:
        failures.append("oracle")

    checks["failures"] = failures
    em.json("verify_report.json", checks)
    em.manifest()
    if failures:
        print(f"verify failures: {failures}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_envelope_demo(args) -> int:
    em = _Emitter(args.out)
    spec = _validated_spec(args, em)
    if spec is None:
        return EXIT_VALIDATION
    u = spec.phi_grid()
    sup = sup_envelope(u, args.eps_env)
    inf = inf_envelope(u, args.eps_env)
    pts = u.points().reshape(-1, u.n)
    rows = [(*[float(c) for c in p], float(a), float(b), float(c2),
             int(d[0]))
            for p, a, b, c2, d in zip(
                pts, u.values.ravel(), sup.env.values.ravel(),
                inf.env.values.ravel(),
                sup.argpoint.reshape(-1, u.n))]
    em.csv("envelope.csv",
           _point_columns(spec.n) + ["u", "sup_env", "inf_env",
                                     "argpoint_offset"], rows)
    em.manifest()
    return EXIT_OK


def cmd_convergence(args) -> int:
    em = _Emitter(args.out)
    spec = _validated_spec(args, em)
    if spec is None:
        return EXIT_VALIDATION
    h_list = [spec.h / 2**k for k in range(args.levels)]
    try:
        rows = verify_mod.convergence_study(
            spec, h_list, solver_config=_solver_config(args))
    except (RuntimeError, FloatingPointError) as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        em.manifest()
        return EXIT_SOLVER
    em.csv("convergence.csv",
           ["h", "diff_to_next", "observed_order", "non_monotone"],
           [(r["h"], r["diff_to_next"],
             ("" if np.isnan(r["observed_order"]) else r["observed_order"]),
             int(r["non_monotone"])) for r in rows])
    em.manifest()
    return EXIT_OK


def cmd_oracle(args) -> int:
    em = _Emitter(args.out)
    result = verify_mod.linear_case_oracle_test(args.sigma, args.h)
    em.csv("oracle.csv", ["x", "computed", "exact", "rel_error"],
           [(p["x"], p["computed"], p["exact"], p["rel_error"])
            for p in result["per_point"]])
    em.json("oracle.json", {k: v for k, v in result.items()
                            if k != "per_point"})
    em.manifest()
    if result["max_rel_error"] > 1e-3:
        print(f"oracle failure: max relative error "
              f"{result['max_rel_error']:.3e} > 1e-3", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nldeg",
        description="Nonlocal Dirichlet problem solver and verification "
                    "harness")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True,
                            help="problem config file (key = value lines)")
        sp.add_argument("--out", required=True, help="artifact directory")

    sp = sub.add_parser("validate", help="check structural conditions")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("solve", help="solve the Dirichlet problem")
    common(sp)
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--max-iters", type=int, default=None, dest="max_iters")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("barriers", help="build and certify barriers")
    common(sp)
    sp.set_defaults(func=cmd_barriers)

    sp = sub.add_parser("verify", help="run the verification suite")
    common(sp)
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--max-iters", type=int, default=None, dest="max_iters")
    sp.add_argument("--oracle-h", type=float, default=0.01,
                    dest="oracle_h")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("envelope-demo", help="sup/inf envelope of phi")
    common(sp)
    sp.add_argument("--eps-env", type=float, default=0.5, dest="eps_env")
    sp.set_defaults(func=cmd_envelope_demo)

    sp = sub.add_parser("convergence", help="grid refinement study")
    common(sp)
    sp.add_argument("--levels", type=int, default=3)
    sp.add_argument("--tol", type=float, default=None)
    sp.set_defaults(func=cmd_convergence)

    sp = sub.add_parser("oracle", help="independent linear-case oracle")
    common(sp, config=False)
    sp.add_argument("--sigma", type=float, default=1.5)
    sp.add_argument("--h", type=float, default=0.005)
    sp.set_defaults(func=cmd_oracle)

    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        with _thread_limit():
            return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
