"""Evaluation of the nonlocal operator and related quantities.

The operator value at a lattice point x splits as

    I[u,x] = near_field_coeff * F'(0) * T(x)          (local quadratic model)
           + sum_j w_j F(delta_u(x, y_j))             (mid-field cells)
           + tail quadrature of F against the closure (|y| > rho_tail)

where T(x) is the centered second-difference trace.  ``OperatorAssembly``
caches all index arrays and the closure part of the tail so a whole-field
evaluation is a few vectorized gathers; the solver reuses one assembly
across iterations.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

import numpy as np

from .model import (Forcing, GridFunction, Nonlinearity, ProblemSpec)
from .quadrature import KernelWeights

_GL8_T, _GL8_W = np.polynomial.legendre.leggauss(8)
_GL8_T = 0.5 * (_GL8_T + 1.0)
_GL8_W = 0.5 * _GL8_W


def solver_region_mask(u: GridFunction, radius: Optional[float] = None) -> np.ndarray:
    """Lattice mask of the region where the operator is evaluated,
    |x| <= radius (default box_radius / 2, Euclidean)."""
    if radius is None:
        radius = u.box_radius / 2.0
    pts = u.points()
    return np.linalg.norm(pts, axis=-1) <= radius + 1e-9 * u.h


class OperatorAssembly:
    """Precomputed gather indices and tail closure for one grid geometry.

    Valid for any values array on the same lattice with the same far-field
    closure; rebuild if the closure changes.
    """

    def __init__(self, u: GridFunction, W: KernelWeights,
                 region_radius: Optional[float] = None,
                 cache_tail: Optional[bool] = None,
                 points: Optional[np.ndarray] = None):
        if abs(u.h - W.h) > 1e-12:
            raise ValueError("grid spacing does not match kernel weights")
        self.grid = u
        self.W = W
        self.n = u.n
        self._ext_values_list = None
        m = u.num_per_axis
        if points is not None:
            pts = np.asarray(points, dtype=float).reshape(-1, u.n)
            self.mask = np.zeros((m,) * u.n, dtype=bool)
            idx = np.rint(pts / u.h).astype(np.int64) + u.center_index
            if np.any((idx < 0) | (idx >= m)):
                raise ValueError("requested point outside the lattice box")
            self.mask[tuple(idx.T)] = True
        else:
            self.mask = solver_region_mask(u, region_radius)
        pts = u.points()
        self.points = pts[self.mask]                      # (k, n)
        k = len(self.points)

        flat_idx = np.arange(self.mask.size).reshape(self.mask.shape)
        self.rows = flat_idx[self.mask]                   # flat indices of region

        # mid-field gathers: one representative offset per +/- pair
        J = W.half_offsets                                # (M2, n)
        base = np.rint(self.points / u.h).astype(np.int64) + u.center_index
        plus = base[:, None, :] + J[None, :, :]
        minus = base[:, None, :] - J[None, :, :]
        self._mid_plus = self._extend_index(plus, m)
        self._mid_minus = self._extend_index(minus, m)

        # near-field second-difference neighbors along each axis
        axes = np.eye(self.n, dtype=np.int64)
        nb_p = base[:, None, :] + axes[None, :, :]
        nb_m = base[:, None, :] - axes[None, :, :]
        self._nb_plus = self._extend_index(nb_p, m)
        self._nb_minus = self._extend_index(nb_m, m)

        # tail closure: phi(x+y_t) + phi(x-y_t), constant during a solve
        T = W.tail_rule
        self.tail_weights = T.weights
        mt = len(T.weights)
        if cache_tail is None:
            cache_tail = k * mt <= 2 * 10**7
        self._tail_base = None
        if cache_tail:
            self._tail_base = self._tail_closure_sum(np.arange(k))
        self._ext_cache = None

    # -- index plumbing ----------------------------------------------------

    def _extend_index(self, idx: np.ndarray, m: int) -> np.ndarray:
        """Map multi-indices to flat indices into the extended value vector
        [lattice values..., closure values...]; out-of-box targets get fresh
        slots whose closure values are precomputed once."""
        inside = np.all((idx >= 0) & (idx < m), axis=-1)
        if self.n == 1:
            flat = idx[..., 0]
        else:
            flat = idx[..., 0] * m + idx[..., 1]
        out = np.where(inside, np.clip(flat, 0, m**self.n - 1), -1)
        if not np.all(inside):
            ext_pts = (idx[~inside] - self.grid.center_index) * self.grid.h
            vals = np.asarray(self.grid.closure(ext_pts), dtype=float)
            if self._ext_values_list is None:
                self._ext_values_list = []
            start = m**self.n + sum(len(v) for v in self._ext_values_list)
            self._ext_values_list.append(vals)
            out[~inside] = start + np.arange(len(vals))
        return out

    def _extended(self, values: np.ndarray) -> np.ndarray:
        flat = values.ravel()
        if self._ext_values_list:
            return np.concatenate([flat] + self._ext_values_list)
        return flat

    def _tail_closure_sum(self, which: np.ndarray) -> np.ndarray:
        T = self.W.tail_rule
        x = self.points[which]
        out = np.empty((len(x), len(T.weights)))
        chunk = max(1, int(4e6 // max(len(T.weights), 1)))
        for s in range(0, len(x), chunk):
            xs = x[s:s + chunk, None, :]
            out[s:s + chunk] = (self.grid.closure(xs + T.points[None]) +
                                self.grid.closure(xs - T.points[None]))
        return out

    # -- evaluation --------------------------------------------------------

    def deltas_mid(self, values: np.ndarray) -> np.ndarray:
        """Symmetric differences at all mid-field representative offsets,
        shape (k, M2)."""
        v = self._extended(values)
        center = values.ravel()[self.rows][:, None]
        return v[self._mid_plus] + v[self._mid_minus] - 2.0 * center

    def trace_term(self, values: np.ndarray) -> np.ndarray:
        """Averaged second-difference trace T(x) = (1/n) sum_i d2_i u / h^2."""
        v = self._extended(values)
        center = values.ravel()[self.rows][:, None]
        d2 = v[self._nb_plus] + v[self._nb_minus] - 2.0 * center
        return np.mean(d2, axis=1) / self.grid.h**2

    def tail_term(self, values: np.ndarray, F: Nonlinearity) -> np.ndarray:
        center = values.ravel()[self.rows]
        if self._tail_base is not None:
            delta = self._tail_base - 2.0 * center[:, None]
            return F(delta) @ self.tail_weights
        out = np.empty(len(center))
        chunk = max(1, int(4e6 // max(len(self.tail_weights), 1)))
        for s in range(0, len(center), chunk):
            base = self._tail_closure_sum(np.arange(s, min(s + chunk, len(center))))
            delta = base - 2.0 * center[s:s + chunk, None]
            out[s:s + chunk] = F(delta) @ self.tail_weights
        return out

    def evaluate(self, values: np.ndarray, F: Nonlinearity) -> np.ndarray:
        """I[u, x] at every region node; shape (k,)."""
        W = self.W
        near = W.near_field_coeff * float(F.deriv(0.0)) * self.trace_term(values)
        mid = F(self.deltas_mid(values)) @ W.half_weights
        tail = self.tail_term(values, F)
        out = near + mid + tail
        if not np.all(np.isfinite(out)):
            bad = self.points[int(np.argmax(~np.isfinite(out)))]
            raise FloatingPointError(f"operator value non-finite at x = {bad}")
        return out


def eval_operator(u: GridFunction, F: Nonlinearity, W: KernelWeights,
                  x) -> float:
    """I[u, x] at a single lattice point x in the solver region."""
    x = np.asarray(x, dtype=float).reshape(u.n)
    if np.linalg.norm(x) > u.box_radius / 2.0 + 1e-9:
        raise ValueError(f"x = {x} outside the solver region |x| <= R/2")
    asm = OperatorAssembly(u, W, points=x[None, :])
    return float(asm.evaluate(u.values, F)[0])


def residual_field(u: GridFunction, spec: ProblemSpec, W: KernelWeights,
                   asm: Optional[OperatorAssembly] = None) -> GridFunction:
    """r(x) = I[u,x] - g(x, u(x)-phi(x)) on the solver region; NaN outside."""
    if asm is None:
        asm = OperatorAssembly(u, W)
    vals = asm.evaluate(u.values, spec.F)
    phi_vals = spec.phi.eval(asm.points)
    w = u.values.ravel()[asm.rows] - phi_vals
    r = vals - spec.g.eval(asm.points, w)
    out = np.full(u.values.shape, np.nan)
    out.ravel()[asm.rows] = r
    return u.with_values(out, allow_unset=True)


# ---------------------------------------------------------------------------
# regularized nonlinearity


def _refine_table(f, nodes: np.ndarray, tol: float, max_nodes: int = 400_000):
    """Insert midpoints wherever the trapezoid/midpoint disagreement of f
    exceeds tol, until the table resolves every kink of f."""
    for _ in range(40):
        fa = f(nodes)
        mids = 0.5 * (nodes[:-1] + nodes[1:])
        fm = f(mids)
        err = np.abs(0.5 * (fa[:-1] + fa[1:]) - fm) * np.diff(nodes)
        bad = err > tol
        if not np.any(bad) or len(nodes) + int(bad.sum()) > max_nodes:
            break
        nodes = np.sort(np.concatenate([nodes, mids[bad]]))
    return nodes


def regularize_F(F: Nonlinearity, eps: float, t_range: float = 1e4) -> Nonlinearity:
    """Uniformly elliptic surrogate with derivative max(eps, F').

    Realized as F + correction where correction(t) = integral_0^t
    max(eps - F'(s), 0) ds.  The correction is tabulated on a log grid
    refined adaptively around the crossings of F' = eps (where the
    integrand kinks), then interpolated; between resolved kinks the
    integrand is locally constant so linear interpolation is near-exact.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")

    def shortfall(t):
        return np.maximum(eps - np.asarray(F.deriv(t), dtype=float), 0.0)

    mags = np.concatenate([[0.0], np.logspace(-8, np.log10(t_range), 4000)])
    ts = np.concatenate([-mags[::-1], mags[1:]])
    ts = _refine_table(shortfall, ts, tol=1e-13 * max(1.0, eps))
    sf = shortfall(ts)
    cum = np.concatenate([[0.0], np.cumsum(
        0.5 * (sf[1:] + sf[:-1]) * np.diff(ts))])
    i0 = int(np.searchsorted(ts, 0.0))
    corr = cum - cum[i0]  # zero at t = 0

    lo_t, hi_t = ts[0], ts[-1]
    lo_c, hi_c = corr[0], corr[-1]
    lo_s, hi_s = sf[0], sf[-1]

    def ev(t):
        t = np.asarray(t, dtype=float)
        out = F(t) + np.interp(t, ts, corr)
        # beyond the table the shortfall at the edge extends linearly
        out = out + np.where(t > hi_t, hi_s * (t - hi_t), 0.0)
        out = out + np.where(t < lo_t, lo_s * (t - lo_t), 0.0)
        return out

    def dv(t):
        return np.maximum(eps, np.asarray(F.deriv(t), dtype=float))

    return Nonlinearity(
        eval=ev, deriv=dv,
        lip_bound=max(F.lip_bound, eps),
        ellipticity_lower=max(eps, F.ellipticity_lower),
        ellipticity_upper=max(F.ellipticity_upper, eps),
        second_deriv_bound=F.second_deriv_bound,
        label=f"{F.label}+floor(eps={eps:g})",
        concave_on_positive=False,
    )


# ---------------------------------------------------------------------------
# transformed-equation quantities


def internal_coefficient(u: GridFunction, phi_grid: GridFunction,
                         F: Nonlinearity, x, y_offset) -> float:
    """Averaged derivative a(x,y) = integral_0^1 F'(delta_u - t delta_phi) dt
    by an 8-node Gauss rule; lies in [ellipticity_lower, upper] when the
    lower bound is positive."""
    from .quadrature import symmetric_difference
    du = symmetric_difference(u, x, y_offset)
    dphi = symmetric_difference(phi_grid, x, y_offset)
    args = du - _GL8_T * dphi
    return float(np.dot(_GL8_W, F.deriv(args)))


def transformed_rhs(u: GridFunction, spec: ProblemSpec, W: KernelWeights,
                    asm: Optional[OperatorAssembly] = None,
                    phi_asm: Optional[OperatorAssembly] = None,
                    gl_order: int = 8) -> np.ndarray:
    """G(x) = g(x, w(x)) - quadrature of delta_phi(x,y) a(x,y) against the
    kernel, over the whole solver region; w = u - phi.

    Shares KernelWeights with the direct evaluation so the identity
    I[w,x] = G(x) holds up to one consistent quadrature error.  In the tail
    u coincides with phi, so delta_u - t delta_phi = (1-t) delta_phi is
    analytic; the coefficient there is clamped to (0, lip_bound] as a
    safety net (count of clamp activations returned via the second output).
    """
    if asm is None:
        asm = OperatorAssembly(u, W)
    phi_grid = spec.phi_grid()
    if phi_asm is None:
        phi_asm = OperatorAssembly(phi_grid, W)
    F = spec.F
    if gl_order == 8:
        gl_t, gl_w = _GL8_T, _GL8_W
    else:
        gl_t, gl_w = np.polynomial.legendre.leggauss(gl_order)
        gl_t = 0.5 * (gl_t + 1.0)
        gl_w = 0.5 * gl_w

    w_vals = u.values.ravel()[asm.rows] - phi_grid.values.ravel()[asm.rows]
    gpart = spec.g.eval(asm.points, w_vals)

    # near field: both deltas quadratic, coefficient -> F'(0)
    near = W.near_field_coeff * float(F.deriv(0.0)) * phi_asm.trace_term(phi_grid.values)

    # mid field: Gauss average of F' between delta_u and delta_u - delta_phi
    du = asm.deltas_mid(u.values)
    dphi = phi_asm.deltas_mid(phi_grid.values)
    acc = np.zeros_like(du)
    for tt, ww in zip(gl_t, gl_w):
        acc += ww * F.deriv(du - tt * dphi)
    mid = (dphi * acc) @ W.half_weights

    # tail: delta_u = delta_phi - 2 w(x) analytically
    T = W.tail_rule
    base = phi_asm._tail_base if phi_asm._tail_base is not None else None
    if base is None:
        base = phi_asm._tail_closure_sum(np.arange(len(asm.points)))
    dphi_t = base - 2.0 * phi_grid.values.ravel()[asm.rows][:, None]
    du_t = dphi_t - 2.0 * w_vals[:, None]
    acc = np.zeros_like(du_t)
    for tt, ww in zip(gl_t, gl_w):
        acc += ww * F.deriv(du_t - tt * dphi_t)
    np.clip(acc, 1e-300, F.lip_bound, out=acc)
    tail = (dphi_t * acc) @ T.weights

    return gpart - (near + mid + tail)
