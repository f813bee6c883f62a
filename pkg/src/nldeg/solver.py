"""Discrete solution of the Dirichlet problem.

Default scheme: damped fixed-point relaxation u <- u + tau (I[u] - g),
clipped to the barrier sandwich [phi, ubar].  Monotonicity of I in the
off-center values plus the monotone forcing make this a contraction for
small tau; ``auto_damping`` returns the explicit-scheme stability budget.
A Newton accelerator (dense linearization using the averaged-derivative
coefficient, n=1 only) cuts the iteration count by orders of magnitude and
is used whenever the problem data support it.

Degenerate nonlinearities are handled by geometric continuation: solve with
the derivative floored at eps_k = eps0 * 2^-k, warm-starting each leg, until
successive solutions are Cauchy within tol_cont.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .barriers import Barrier, build_supersolution_superlinear
from .model import GridFunction, Nonlinearity, ProblemSpec, sample_to_grid
from .operator import OperatorAssembly, regularize_F
from .quadrature import KernelWeights


@dataclass
class SolverConfig:
    tau_relax: Optional[float] = None      # None = auto stability budget
    tol_residual: float = 1e-6
    max_iters: int = 500_000
    eps0: float = 0.5                      # continuation start
    tol_cont: float = 1e-4                 # continuation Cauchy stop
    max_cont_legs: int = 40
    clip_to_barriers: bool = True
    log_every: int = 0
    use_newton: bool = True                # accelerator where supported
    newton_fallback_iters: int = 500       # fixed-point steps after a failed step

    def __post_init__(self):
        if self.tau_relax is not None and self.tau_relax <= 0:
            raise ValueError("tau_relax must be positive")
        if self.tol_residual <= 0 or self.eps0 <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class SolveReport:
    u: GridFunction
    residual_history: np.ndarray
    continuation_trace: List[dict]
    barrier: Optional[Barrier]
    sandwich_violations: int
    clip_activations: int
    iterations: int
    wall_time: float
    converged: bool
    final_residual: float


def _linearization_bound(spec: ProblemSpec, W: KernelWeights,
                         F: Nonlinearity) -> float:
    """Row-sum bound on the residual linearization: near-field second
    differences carry near_field_coeff * 2n/h^2, each mid cell at most 4x
    its weight, the tail 2x its weight, all times sup F', plus the forcing
    slope."""
    Lam = max(F.ellipticity_upper, 1e-300)
    mass = (W.near_field_coeff * 2.0 * spec.n / W.h**2
            + 4.0 * float(np.sum(W.mid_weights))
            + 2.0 * float(np.sum(W.tail_rule.weights)))
    g_slope = spec.g.t_local_lip if spec.g.t_local_lip else spec.g.monotone_rate
    return Lam * mass + spec.g.monotone_rate + g_slope


def auto_damping(spec: ProblemSpec, W: KernelWeights,
                 F: Optional[Nonlinearity] = None) -> float:
    """Stability budget 0.9 / (row-sum bound of the linearization)."""
    if F is None:
        F = spec.F
    tau = 0.9 / _linearization_bound(spec, W, F)
    return float(min(tau, 1.0))


def _newton_matrix(asm: OperatorAssembly, values: np.ndarray,
                   F: Nonlinearity, g_slope: np.ndarray, W: KernelWeights,
                   h: float) -> np.ndarray:
    """Dense Jacobian of the residual map restricted to region unknowns (n=1)."""
    k = len(asm.rows)
    col_of = np.full(asm.grid.values.size + 1, -1, dtype=np.int64)
    col_of[asm.rows] = np.arange(k)
    J = np.zeros((k, k))
    rows_arange = np.arange(k)

    # mid field: hw_j F'(delta_j) into columns x +/- y_j, -2 hw F' on diag
    dmid = asm.deltas_mid(values)
    Fp = np.asarray(F.deriv(dmid))
    hw = W.half_weights[None, :]
    contrib = hw * Fp
    for cols in (asm._mid_plus, asm._mid_minus):
        cc = np.where(cols < asm.grid.values.size, col_of[cols], -1)
        valid = cc >= 0
        np.add.at(J, (np.broadcast_to(rows_arange[:, None], cc.shape)[valid],
                      cc[valid]), contrib[valid])
    J[rows_arange, rows_arange] += -2.0 * np.sum(contrib, axis=1)

    # near field: nfc F'(0) [1, -2, 1]/h^2
    c0 = W.near_field_coeff * float(F.deriv(0.0)) / h**2
    for cols in (asm._nb_plus, asm._nb_minus):
        cc = np.where(cols < asm.grid.values.size, col_of[cols], -1)
        valid = cc >= 0
        np.add.at(J, (np.broadcast_to(rows_arange[:, None], cc.shape)[valid],
                      cc[valid]), np.full(int(valid.sum()), c0))
    J[rows_arange, rows_arange] += -2.0 * c0

    # tail: only the center value enters
    center = values.ravel()[asm.rows]
    if asm._tail_base is not None:
        dt = asm._tail_base - 2.0 * center[:, None]
        J[rows_arange, rows_arange] += -2.0 * (np.asarray(F.deriv(dt))
                                               @ asm.tail_weights)
    else:
        base = asm._tail_closure_sum(np.arange(k))
        dt = base - 2.0 * center[:, None]
        J[rows_arange, rows_arange] += -2.0 * (np.asarray(F.deriv(dt))
                                               @ asm.tail_weights)

    # forcing
    J[rows_arange, rows_arange] += -g_slope
    return J


def solve_uniformly_elliptic(spec: ProblemSpec, W: KernelWeights,
                             config: Optional[SolverConfig] = None,
                             u_init: Optional[GridFunction] = None,
                             F_override: Optional[Nonlinearity] = None,
                             barrier: Optional[Barrier] = None) -> SolveReport:
    """Iterate to the discrete solution; requires F' bounded below by a
    positive constant (pass a regularized F for degenerate families)."""
    config = config or SolverConfig()
    F = F_override if F_override is not None else spec.F
    if F.ellipticity_lower <= 0:
        raise ValueError("F is degenerate (inf F' = 0); use solve_degenerate")

    t_start = time.time()
    phi_grid = spec.phi_grid()
    if barrier is None and config.clip_to_barriers:
        barrier = build_supersolution_superlinear(
            spec, W, require_superlinear=spec.g.superlinear)
    ubar_vals = barrier.profile.values if barrier is not None else None

    u = u_init if u_init is not None else phi_grid
    values = u.values.copy()
    asm = OperatorAssembly(phi_grid, W)   # closure is phi throughout
    # only region nodes are unknowns; the truncation convention u = phi
    # holds at every other node regardless of the initial guess
    values[~asm.mask] = phi_grid.values[~asm.mask]
    pts = asm.points
    phi_region = phi_grid.values.ravel()[asm.rows]
    tau = config.tau_relax if config.tau_relax is not None \
        else auto_damping(spec, W, F)
    # residual values are sums of terms of magnitude up to L * |u|, so the
    # evaluation carries rounding noise near eps_mach * L * |u|; for very
    # stiff F the requested tolerance may sit below that floor
    L_bound = _linearization_bound(spec, W, F)

    def tol_effective(vals):
        noise = 4.0 * np.finfo(float).eps * L_bound \
            * (1.0 + float(np.max(np.abs(vals))))
        return max(config.tol_residual, noise)

    lo = phi_grid.values.ravel()[asm.rows]
    hi = ubar_vals.ravel()[asm.rows] if ubar_vals is not None else None

    def residual(vals_flat_region, values):
        I = asm.evaluate(values, F)
        return I - spec.g.eval(pts, vals_flat_region - phi_region)

    can_newton = (config.use_newton and spec.n == 1
                  and spec.g.deriv_t is not None)

    history = []
    clip_count = 0
    it = 0
    converged = False
    up_streak = 0
    flat = values.ravel()
    r = residual(flat[asm.rows], values)
    rn = float(np.max(np.abs(r)))
    history.append(rn)

    while it < config.max_iters and not converged:
        tol = tol_effective(flat[asm.rows])
        if rn <= tol:
            converged = True
            break
        stepped = False
        if can_newton:
            g_slope = np.asarray(spec.g.deriv_t(pts, flat[asm.rows] - phi_region))
            J = _newton_matrix(asm, values, F, g_slope, W, spec.h)
            try:
                delta = np.linalg.solve(J, -r)
            except np.linalg.LinAlgError:
                delta = None
            if delta is not None:
                s = 1.0
                while s >= 2.0**-12:
                    trial = flat.copy()
                    trial[asm.rows] = flat[asm.rows] + s * delta
                    if hi is not None and config.clip_to_barriers:
                        clipped = np.clip(trial[asm.rows], lo, hi)
                        clip_count += int(np.sum(clipped != trial[asm.rows]))
                        trial[asm.rows] = clipped
                    tv = trial.reshape(values.shape)
                    rt = residual(trial[asm.rows], tv)
                    rtn = float(np.max(np.abs(rt)))
                    if rtn <= (1.0 - 0.25 * s) * rn or rtn <= tol:
                        flat, values, r, rn = trial, tv, rt, rtn
                        stepped = True
                        break
                    s *= 0.5
            it += 1
            history.append(rn)
            if stepped:
                continue
        # damped fixed-point sweep(s)
        n_fp = config.newton_fallback_iters if can_newton else 1
        for _ in range(n_fp):
            upd = flat[asm.rows] + tau * r
            if hi is not None and config.clip_to_barriers:
                clipped = np.clip(upd, lo, hi)
                clip_count += int(np.sum(clipped != upd))
                upd = clipped
            flat = flat.copy()
            flat[asm.rows] = upd
            values = flat.reshape(values.shape)
            r = residual(upd, values)
            prev = rn
            rn = float(np.max(np.abs(r)))
            history.append(rn)
            it += 1
            if rn <= tol or it >= config.max_iters:
                break
            if it > 100 and rn > prev * (1.0 + 1e-12):
                up_streak += 1
                if up_streak >= 3 and rn > history[max(0, it - 10)]:
                    raise RuntimeError(
                        f"residual rising for {up_streak} consecutive "
                        f"iterations (now {rn:.3g}); decrease tau_relax "
                        f"(currently {tau:.3g})")
            else:
                up_streak = 0
        if rn <= tol:
            converged = True

    if not converged:
        raise RuntimeError(
            f"no convergence after {it} iterations; residual history tail: "
            f"{[f'{v:.3g}' for v in history[-5:]]}")

    violations = 0
    if hi is not None:
        violations = int(np.sum((flat[asm.rows] < lo - 1e-12)
                                | (flat[asm.rows] > hi + 1e-12)))
    u_out = GridFunction(spec.n, spec.h, spec.R_dom, values,
                         far_field=spec.phi.eval, far_field_label="phi")
    return SolveReport(
        u=u_out, residual_history=np.array(history),
        continuation_trace=[], barrier=barrier,
        sandwich_violations=violations, clip_activations=clip_count,
        iterations=it, wall_time=time.time() - t_start,
        converged=True, final_residual=rn)


def solve_degenerate(spec: ProblemSpec, W: KernelWeights,
                     config: Optional[SolverConfig] = None) -> SolveReport:
    """Continuation over derivative floors eps_k = eps0 2^-k with warm
    starts; stops when successive legs are Cauchy within tol_cont."""
    config = config or SolverConfig()
    t_start = time.time()
    trace = []
    u_prev = None
    report = None
    history = []
    total_iters = 0
    barrier = None
    for k in range(config.max_cont_legs):
        eps = config.eps0 * 2.0**-k
        Fk = spec.F if spec.F.ellipticity_lower >= eps \
            else regularize_F(spec.F, eps)
        report = solve_uniformly_elliptic(
            spec, W, config, u_init=u_prev, F_override=Fk, barrier=barrier)
        barrier = report.barrier
        history.extend(report.residual_history.tolist())
        total_iters += report.iterations
        gap = np.inf if u_prev is None else float(
            np.max(np.abs(report.u.values - u_prev.values)))
        trace.append({"k": k, "eps": eps, "gap": gap,
                      "iters": report.iterations})
        u_prev = report.u
        if k >= 1 and gap <= config.tol_cont:
            break
        if k >= 3:
            gaps = [t["gap"] for t in trace[-3:]]
            if gaps[0] <= gaps[1] <= gaps[2]:
                raise RuntimeError(
                    "continuation stalled: gaps not decreasing for 3 legs "
                    f"({gaps}); tol_residual may be too loose relative to "
                    "tol_cont")
    return SolveReport(
        u=report.u, residual_history=np.array(history),
        continuation_trace=trace, barrier=report.barrier,
        sandwich_violations=report.sandwich_violations,
        clip_activations=report.clip_activations,
        iterations=total_iters, wall_time=time.time() - t_start,
        converged=True, final_residual=report.final_residual)


def solve(spec: ProblemSpec, W: KernelWeights,
          config: Optional[SolverConfig] = None) -> SolveReport:
    """Dispatch on ellipticity: direct solve when the continuation's first
    derivative floor eps0 would leave F unchanged (inf F' >= eps0),
    continuation otherwise."""
    eps0 = (config or SolverConfig()).eps0
    if spec.F.ellipticity_lower >= eps0:
        return solve_uniformly_elliptic(spec, W, config)
    return solve_degenerate(spec, W, config)
