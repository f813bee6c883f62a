"""Sub/supersolution construction and numeric certificates.

The boundary datum itself is a subsolution (convexity gives I[phi] >= 0 =
g(x,0)).  Supersolutions have the form phi + M u0 with a decaying bump u0;
M is found by doubling until the defining inequality holds on every
solver-region node, and the certificate (worst residual + node) is attached.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .model import BoundaryDatum, GridFunction, ProblemSpec, make_nonlinearity, sample_to_grid
from .operator import OperatorAssembly
from .quadrature import KernelWeights

_IDENTITY = make_nonlinearity("identity")


@dataclass(frozen=True)
class Certificate:
    passed: bool
    kind: str
    extremum: float           # min (subsolution) or max (supersolution) residual
    worst_node: tuple
    tol: float
    detail: str = ""

    def as_dict(self):
        return {"passed": self.passed, "kind": self.kind,
                "extremum": self.extremum, "worst_node": list(self.worst_node),
                "tol": self.tol, "detail": self.detail}


@dataclass(frozen=True)
class Barrier:
    profile: GridFunction
    kind: str                 # subsolution_phi | super_superlinear | super_concave
    M: float
    exponent: float           # p (superlinear) or tau (concave)
    certificate: Certificate


def check_subsolution_phi(spec: ProblemSpec, W: KernelWeights,
                          tol: float = 1e-8) -> Certificate:
    """Certify I[phi, x] >= g(x, 0) - tol = -tol on the solver region.

    Convexity of phi makes every symmetric difference nonnegative, so a
    failure indicates a quadrature bug rather than a wrong problem.
    """
    pg = spec.phi_grid()
    asm = OperatorAssembly(pg, W)
    vals = asm.evaluate(pg.values, spec.F)
    j = int(np.argmin(vals))
    passed = bool(vals[j] >= -tol)
    return Certificate(passed, "subsolution_phi", float(vals[j]),
                       tuple(asm.points[j]), tol,
                       detail=f"min I[phi] over {len(vals)} nodes")


def _doubling_search(residual_at, M_max: float):
    """Double M from 1 until residual_at(M) <= 0 at every node."""
    M = 1.0
    while M <= M_max:
        r, node = residual_at(M)
        if r <= 0:
            return M, r, node
        M *= 2.0
    return None, r, node


def build_supersolution_superlinear(spec: ProblemSpec, W: KernelWeights,
                                    tol: float = 1e-6, M_max: float = 2.0**30,
                                    require_superlinear: bool = True) -> Barrier:
    """Supersolution phi + M (1+|x|^2)^(-p/2) with p = (sigma-1)/2.

    Certifies I[ubar, x] <= g(x, M u0(x)) + tol at all region nodes by a
    doubling search on M.  With ``require_superlinear`` off the same search
    is attempted for forcings that grow only linearly; it still succeeds
    whenever the negative bump contribution can absorb I[phi] (always the
    case for F = identity), and fails with the M_max error otherwise.
    """
    if require_superlinear and not spec.g.superlinear:
        raise ValueError("forcing is not flagged superlinear; this barrier "
                         "needs superlinear growth (or pass "
                         "require_superlinear=False to try anyway)")
    p = (spec.sigma - 1.0) / 2.0

    def u0(x):
        x = np.asarray(x, dtype=float)
        return (1.0 + np.sum(x * x, axis=-1)) ** (-p / 2.0)

    phi = spec.phi

    def residual_at(M):
        closure = lambda x: phi.eval(x) + M * u0(x)
        ubar = sample_to_grid(closure, spec.n, spec.R_dom, spec.h,
                              far_field=closure, far_field_label="ubar")
        asm = OperatorAssembly(ubar, W)
        lhs = asm.evaluate(ubar.values, spec.F)
        rhs = spec.g.eval(asm.points, M * u0(asm.points))
        r = lhs - rhs - tol
        j = int(np.argmax(r))
        return float(r[j]), tuple(asm.points[j])

    M, worst, node = _doubling_search(residual_at, M_max)
    if M is None:
        raise RuntimeError(
            f"doubling search exceeded M_max={M_max:g}: superlinearity too "
            f"weak at this scale (worst node {node}, residual {worst:.3g})")
    closure = lambda x: phi.eval(x) + M * u0(x)
    profile = sample_to_grid(closure, spec.n, spec.R_dom, spec.h,
                             far_field=closure, far_field_label="ubar")
    cert = Certificate(True, "super_superlinear", worst + tol, node, tol,
                       detail=f"I[ubar] - g(x, M u0) max over region; M={M:g}")
    return Barrier(profile, "super_superlinear", M, p, cert)


# ---------------------------------------------------------------------------
# concave-F barrier: decaying potential-type bump (n > sigma only)


def _ring_average_factor(nu: float, n_k: int = 4001):
    """Tabulated angular factor: for points at radii r, s in the plane,
    the theta-average of |x - z|^nu equals (r+s)^nu * A(k) with
    k^2 = 4 r s / (r+s)^2; returns a spline for A over k in [0, 1]."""
    ks = np.linspace(0.0, 1.0, n_k)

    def one(k):
        f = lambda t: (max(1.0 - (k * np.sin(t)) ** 2, 1e-300)) ** (nu / 2.0)
        v, _ = integrate.quad(f, 0.0, np.pi / 2.0, limit=200)
        return 2.0 * v / np.pi
    vals = np.array([one(k) for k in ks])
    return CubicSpline(ks, vals)


def riesz_bump_profile(sigma: float, n: int, tau: float,
                       r_grid: Optional[np.ndarray] = None):
    """Radial profile of u0 = conv( min(1, |z|^(-sigma-tau)), |x|^(sigma-n) ).

    Returns (r_grid, values, evaluate) where ``evaluate`` interpolates on a
    log grid and extrapolates with the r^(-tau) power law.  Only n=2 is
    supported (the decaying kernel needs n > sigma).
    """
    if n != 2:
        raise ValueError("potential-type bump implemented for n=2 only")
    nu = sigma - n
    if r_grid is None:
        r_grid = np.logspace(-2, 3, 160)
    A = _ring_average_factor(nu)
    # source integral over s: f(s) * 2 pi s * (r+s)^nu * A(k)
    s = np.logspace(-4, 5, 3000)
    fs = np.minimum(1.0, s ** (-sigma - tau))
    vals = np.empty_like(r_grid)
    for i, r in enumerate(r_grid):
        k = np.sqrt(np.clip(4.0 * r * s / (r + s) ** 2, 0.0, 1.0))
        integ = fs * 2.0 * np.pi * s * (r + s) ** nu * A(k)
        vals[i] = np.trapezoid(integ, s)
        # analytic closure of the far source: f ~ s^(-sigma-tau), kernel ~ s^nu
        S = s[-1]
        vals[i] += 2.0 * np.pi * S ** (2 + nu - sigma - tau) / (sigma + tau - 2 - nu)
    # normalize so u0 <= 1 (the barrier scale is carried by M)
    scale = float(np.max(vals))
    vals = vals / scale
    logspline = CubicSpline(np.log(r_grid), vals)
    tail_c = vals[-1] * r_grid[-1] ** tau

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        r_in = np.clip(r, r_grid[0], r_grid[-1])
        out = logspline(np.log(r_in))
        return np.where(r > r_grid[-1], tail_c * np.maximum(r, r_grid[-1]) ** (-tau), out)

    return r_grid, vals, evaluate


def build_supersolution_concave(spec: ProblemSpec, W: KernelWeights,
                                tol: float = 1e-6, M_max: float = 2.0**30,
                                super_tol: float = 1e-2) -> Barrier:
    """Supersolution for F concave on [0, inf): phi + M u0 with u0 a
    decaying potential-type bump, tau = min(sigma-1, n-sigma)/2.

    Certifies the linearized chain
        M F'(0) I_id[u0, x] + L1 I_id[phi, x] <= g(x, M u0(x)) + tol,
    which dominates I[phi + M u0] for concave F.  Requires n > sigma;
    u0 is accepted only if I_id[u0] <= super_tol at the region nodes.
    """
    if not spec.F.concave_on_positive:
        raise ValueError("nonlinearity is not flagged concave on [0, inf)")
    if spec.n <= spec.sigma:
        raise ValueError("concave-F barrier requires n > sigma "
                         "(no decaying kernel profile otherwise); "
                         "use the superlinear barrier instead")
    tau = min(spec.sigma - 1.0, spec.n - spec.sigma) / 2.0
    _, _, u0 = riesz_bump_profile(spec.sigma, spec.n, tau)

    u0_grid = sample_to_grid(u0, spec.n, spec.R_dom, spec.h,
                             far_field=u0, far_field_label="bump")
    phi_grid = spec.phi_grid()
    asm_u0 = OperatorAssembly(u0_grid, W)
    asm_phi = OperatorAssembly(phi_grid, W)
    I_u0 = asm_u0.evaluate(u0_grid.values, _IDENTITY)
    I_phi = asm_phi.evaluate(phi_grid.values, _IDENTITY)

    worst_super = float(np.max(I_u0))
    if worst_super > super_tol:
        raise RuntimeError(
            f"bump fails the decaying-potential sign check: max I_id[u0] = "
            f"{worst_super:.3g} > {super_tol:g}")

    Fp0 = float(spec.F.deriv(0.0))
    L1 = spec.F.lip_bound
    u0_vals = u0(asm_u0.points)

    def residual_at(M):
        lhs = M * Fp0 * I_u0 + L1 * I_phi
        rhs = spec.g.eval(asm_u0.points, M * u0_vals)
        r = lhs - rhs - tol
        j = int(np.argmax(r))
        return float(r[j]), tuple(asm_u0.points[j])

    M, worst, node = _doubling_search(residual_at, M_max)
    if M is None:
        raise RuntimeError(
            f"doubling search exceeded M_max={M_max:g} for the concave-F "
            f"barrier (worst node {node}, residual {worst:.3g})")
    closure = lambda x: spec.phi.eval(x) + M * u0(x)
    profile = sample_to_grid(closure, spec.n, spec.R_dom, spec.h,
                             far_field=closure, far_field_label="ubar")
    cert = Certificate(True, "super_concave", worst + tol, node, tol,
                       detail=f"linearized chain max over region; M={M:g}; "
                              f"max I_id[u0] = {worst_super:.3g}")
    return Barrier(profile, "super_concave", M, tau, cert)


# ---------------------------------------------------------------------------
# decay of the identity-F operator along a ray


def cone_decay_check(phi: BoundaryDatum, sigma: float, W: KernelWeights,
                     R_dom: Optional[float] = None) -> dict:
    """Evaluate I_id[phi] at dyadic radii along the first axis and fit the
    log-log slope over the last four radii; for a datum close to a cone the
    expected slope is -(sigma - 1)."""
    if R_dom is None:
        R_dom = 2.0 * W.rho_tail
    n = W.n
    pg = sample_to_grid(phi.eval, n, R_dom, W.h, far_field=phi.eval,
                        far_field_label="phi")
    radii = []
    r = 1.0
    while r <= R_dom / 2.0 + 1e-9:
        radii.append(r)
        r *= 2.0
    pts = np.zeros((len(radii), n))
    pts[:, 0] = radii
    asm = OperatorAssembly(pg, W, points=pts)
    vals = asm.evaluate(pg.values, _IDENTITY)
    order = np.argsort(asm.points[:, 0])
    radii_v = asm.points[order, 0]
    vals = vals[order]
    report = {"radii": radii_v.tolist(), "values": vals.tolist(),
              "nonpositive_nodes": radii_v[vals <= 0].tolist()}
    if np.all(vals == 0.0):
        report.update({"slope": None, "C_fit": None, "degenerate": True})
        return report
    pos = vals > 0
    rr, vv = radii_v[pos][-4:], vals[pos][-4:]
    if len(rr) < 2:
        report.update({"slope": None, "C_fit": None, "degenerate": True})
        return report
    slope, logc = np.polyfit(np.log(rr), np.log(vv), 1)
    report.update({"slope": float(slope), "C_fit": float(np.exp(logc)),
                   "degenerate": False, "expected_slope": -(sigma - 1.0)})
    return report
