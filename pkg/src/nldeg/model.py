"""Problem data: nonlinearities, forcing terms, boundary data, grids.

All spatial callables are vectorized over numpy arrays of shape (..., n)
and return shape (...).  Scalar nonlinearities are vectorized over plain
arrays.  Everything here is immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate


# ---------------------------------------------------------------------------
# scalar nonlinearity


@dataclass(frozen=True)
class Nonlinearity:
    """Increasing scalar function applied to the symmetric difference.

    ``eval`` and ``deriv`` are vectorized callables.  ``lip_bound`` is a
    global Lipschitz constant, ``ellipticity_lower``/``ellipticity_upper``
    bound the derivative (lower may be 0 for degenerate families).
    """

    eval: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    lip_bound: float
    ellipticity_lower: float
    ellipticity_upper: float
    second_deriv_bound: Optional[float] = None
    label: str = "custom"
    concave_on_positive: bool = False

    def __call__(self, t):
        return self.eval(np.asarray(t, dtype=float))


def _smoothstep_antideriv(u):
    # antiderivative of 3u^2 - 2u^3 on [0, 1]
    return u**3 - 0.5 * u**4


def _piecewise_slopes(s1, s2, s3, a, b, w):
    """Odd C^1 function with slopes (s1, s2, s3) on (|t|<a, a<|t|<b, |t|>b),
    corners blended over width w."""
    a1, a2 = a - w / 2.0, a + w / 2.0
    b1, b2 = b - w / 2.0, b + w / 2.0
    if a1 <= 0 or a2 >= b1:
        raise ValueError("mollification width does not fit between corners")
    # cumulative values of F at the breakpoints (t >= 0 branch)
    F_a1 = s1 * a1
    F_a2 = F_a1 + w * (s1 + s2) / 2.0
    F_b1 = F_a2 + s2 * (b1 - a2)
    F_b2 = F_b1 + w * (s2 + s3) / 2.0

    def deriv(t):
        t = np.abs(np.asarray(t, dtype=float))
        u_a = np.clip((t - a1) / w, 0.0, 1.0)
        u_b = np.clip((t - b1) / w, 0.0, 1.0)
        step_a = 3 * u_a**2 - 2 * u_a**3
        step_b = 3 * u_b**2 - 2 * u_b**3
        return s1 + (s2 - s1) * step_a + (s3 - s2) * step_b

    def evaluate(t):
        t = np.asarray(t, dtype=float)
        x = np.abs(t)
        u_a = np.clip((x - a1) / w, 0.0, 1.0)
        u_b = np.clip((x - b1) / w, 0.0, 1.0)
        out = np.where(
            x < a1,
            s1 * x,
            np.where(
                x < a2,
                F_a1 + s1 * (x - a1) + (s2 - s1) * w * _smoothstep_antideriv(u_a),
                np.where(
                    x < b1,
                    F_a2 + s2 * (x - a2),
                    np.where(
                        x < b2,
                        F_b1 + s2 * (x - b1) + (s3 - s2) * w * _smoothstep_antideriv(u_b),
                        F_b2 + s3 * (x - b2),
                    ),
                ),
            ),
        )
        return np.sign(t) * out

    return evaluate, deriv


def make_nonlinearity(kind: str, **params) -> Nonlinearity:
    """Construct one of the built-in nonlinearity families.

    Kinds: ``identity``, ``smooth_piecewise_slopes`` (s1, s2, s3, a, b),
    ``arctan_scaled`` (base, amp, scale), ``concave_soft`` (scale),
    ``custom`` (eval, deriv, lip_bound, ...).
    """
    if kind == "identity":
        return Nonlinearity(
            eval=lambda t: np.asarray(t, dtype=float),
            deriv=lambda t: np.ones_like(np.asarray(t, dtype=float)),
            lip_bound=1.0,
            ellipticity_lower=1.0,
            ellipticity_upper=1.0,
            second_deriv_bound=0.0,
            label="identity",
        )
    if kind == "smooth_piecewise_slopes":
        s1, s2, s3 = (float(params[k]) for k in ("s1", "s2", "s3"))
        a, b = float(params["a"]), float(params["b"])
        if min(s1, s2, s3) <= 0:
            raise ValueError("slopes must be positive (monotonicity)")
        if a >= b:
            raise ValueError("inner threshold a must be below outer threshold b")
        w = params.get("width", a / 10.0)
        ev, dv = _piecewise_slopes(s1, s2, s3, a, b, w)
        top = max(s1, s2, s3)
        return Nonlinearity(
            eval=ev,
            deriv=dv,
            lip_bound=top,
            ellipticity_lower=min(s1, s2, s3),
            ellipticity_upper=top,
            label=f"slopes({s1:g},{s2:g},{s3:g};a={a:g},b={b:g})",
        )
    if kind == "arctan_scaled":
        base = float(params.get("base", 0.5))
        amp = float(params.get("amp", 1.0))
        scale = float(params.get("scale", 1.0))
        if base <= 0 or amp <= 0 or scale <= 0:
            raise ValueError("arctan_scaled parameters must be positive")
        return Nonlinearity(
            eval=lambda t: base * np.asarray(t, float) + amp * np.arctan(np.asarray(t, float) / scale),
            deriv=lambda t: base + (amp / scale) / (1.0 + (np.asarray(t, float) / scale) ** 2),
            lip_bound=base + amp / scale,
            ellipticity_lower=base,
            ellipticity_upper=base + amp / scale,
            second_deriv_bound=(amp / scale**2) * (3.0 * np.sqrt(3.0) / 8.0),
            label=f"arctan(base={base:g},amp={amp:g},scale={scale:g})",
        )
    if kind == "concave_soft":
        c = float(params.get("scale", 1.0))
        if c <= 0:
            raise ValueError("scale must be positive")
        return Nonlinearity(
            eval=lambda t: np.sign(t) * c * np.log1p(np.abs(np.asarray(t, float)) / c),
            deriv=lambda t: 1.0 / (1.0 + np.abs(np.asarray(t, float)) / c),
            lip_bound=1.0,
            ellipticity_lower=0.0,
            ellipticity_upper=1.0,
            label=f"concave_soft(scale={c:g})",
            concave_on_positive=True,
        )
    if kind == "custom":
        return Nonlinearity(**params)
    raise ValueError(f"unknown nonlinearity kind: {kind!r}")


# ---------------------------------------------------------------------------
# forcing term


@dataclass(frozen=True)
class Forcing:
    """Forcing g(x, t): monotone in t with rate >= mu, Lipschitz in x."""

    eval: Callable[[np.ndarray, np.ndarray], np.ndarray]  # (points(...,n), t) -> (...)
    x_lip: float
    monotone_rate: float
    superlinear: bool = False
    t_local_lip: Optional[float] = None
    deriv_t: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    label: str = "custom"


def make_forcing(kind: str, mu: float = 1.0, **params) -> Forcing:
    """Built-in forcing families: ``linear`` (mu*t), ``linear_cubic``
    (mu*t + t^3, superlinear), ``pure_cubic`` (t^3; fails the monotone-rate
    validation near 0 -- used as a negative control), ``custom``."""
    mu = float(mu)
    if kind == "linear":
        return Forcing(
            eval=lambda x, t: mu * np.asarray(t, float) + np.zeros(np.shape(x)[:-1]),
            x_lip=0.0,
            monotone_rate=mu,
            superlinear=False,
            t_local_lip=mu,
            deriv_t=lambda x, t: mu + np.zeros(np.shape(x)[:-1]),
            label=f"linear(mu={mu:g})",
        )
    if kind == "linear_cubic":
        return Forcing(
            eval=lambda x, t: mu * np.asarray(t, float) + np.asarray(t, float) ** 3
            + np.zeros(np.shape(x)[:-1]),
            x_lip=0.0,
            monotone_rate=mu,
            superlinear=True,
            deriv_t=lambda x, t: mu + 3.0 * np.asarray(t, float) ** 2 + np.zeros(np.shape(x)[:-1]),
            label=f"linear_cubic(mu={mu:g})",
        )
    if kind == "pure_cubic":
        return Forcing(
            eval=lambda x, t: np.asarray(t, float) ** 3 + np.zeros(np.shape(x)[:-1]),
            x_lip=0.0,
            monotone_rate=mu,
            superlinear=True,
            deriv_t=lambda x, t: 3.0 * np.asarray(t, float) ** 2 + np.zeros(np.shape(x)[:-1]),
            label="pure_cubic",
        )
    if kind == "custom":
        return Forcing(monotone_rate=mu, **params)
    raise ValueError(f"unknown forcing kind: {kind!r}")


# ---------------------------------------------------------------------------
# boundary datum


@dataclass(frozen=True)
class BoundaryDatum:
    """Convex Lipschitz datum phi = cone + decaying perturbation."""

    eval: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    lip_bound: float            # gradient bound
    hess_bound: float           # Hessian upper bound as quadratic form
    cone_slope: float
    perturbation_decay: tuple   # (eps_cone, C_cone) of the cone-closeness bound
    hess_lip: Optional[float] = None
    label: str = "custom"

    def __call__(self, x):
        return self.eval(np.asarray(x, dtype=float))

    def cone(self, x):
        """The cone part: slope * |x|."""
        x = np.asarray(x, dtype=float)
        return self.cone_slope * np.linalg.norm(x, axis=-1)

    def kernel_weighted_l1(self, n: int, sigma: float, rtol_check: float = 1e-6):
        """Quadrature value of the |phi| integral against (1+|y|)^(-n-sigma).

        Returns (value, refinement_gap).  The datum family is radial, so the
        integral reduces to a 1-D radial quadrature.
        """
        if n == 1:
            def radial(r):
                pts = r[..., None]
                return np.abs(self.eval(pts)) + np.abs(self.eval(-pts))
            ang = 1.0
        else:
            theta = (np.arange(16) + 0.5) * (2 * np.pi / 16)
            dirs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)

            def radial(r):
                pts = r[..., None, None] * dirs
                return np.mean(np.abs(self.eval(pts)), axis=-1) * r
            ang = 2 * np.pi

        def integrand(r):
            r = np.atleast_1d(np.asarray(r, dtype=float))
            return radial(r) * (1.0 + r) ** (-n - sigma)

        val, _ = integrate.quad(lambda r: float(integrand(r)[0]), 0, np.inf,
                                limit=400, epsabs=1e-12, epsrel=1e-10)
        ref, _ = integrate.quad(lambda r: float(integrand(r)[0]), 0, np.inf,
                                limit=800, epsabs=1e-13, epsrel=1e-12)
        gap = abs(val - ref) / max(abs(ref), 1e-300)
        return ang * val, gap


def make_boundary_datum(kind: str, n: int = 1, **params) -> BoundaryDatum:
    """Built-in boundary data.

    ``smoothed_cone`` with slope a gives phi(x) = a*sqrt(1+|x|^2); the cone
    part is a|x| and the perturbation decays like 1/|x|.  ``flat_plus_bump``
    is rejected: a decaying bump is not convex.
    """
    if kind == "smoothed_cone":
        a = float(params.get("slope", 1.0))
        if a < 0:
            raise ValueError("cone slope must be nonnegative (convexity)")

        def ev(x):
            x = np.asarray(x, dtype=float)
            return a * np.sqrt(1.0 + np.sum(x * x, axis=-1))

        def gr(x):
            x = np.asarray(x, dtype=float)
            s = np.sqrt(1.0 + np.sum(x * x, axis=-1))
            return a * x / s[..., None]

        def he(x):
            x = np.asarray(x, dtype=float)
            q = 1.0 + np.sum(x * x, axis=-1)
            eye = np.eye(x.shape[-1])
            outer = x[..., :, None] * x[..., None, :]
            return a * (q[..., None, None] * eye - outer) / q[..., None, None] ** 1.5

        eps_cone = 1.0 if n >= 2 else 0.9
        return BoundaryDatum(
            eval=ev, grad=gr, hess=he,
            lip_bound=a, hess_bound=a,
            cone_slope=a,
            perturbation_decay=(eps_cone, max(a, 1e-300)),
            hess_lip=3.0 * a,
            label=f"smoothed_cone(a={a:g})",
        )
    if kind == "flat_plus_bump":
        raise ValueError("flat_plus_bump is not convex; use smoothed_cone")
    if kind == "custom":
        return BoundaryDatum(**params)
    raise ValueError(f"unknown boundary datum kind: {kind!r}")


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class GridFunction:
    """Uniform-lattice sample on [-R, R]^n with an analytic far-field closure.

    ``far_field`` is a callable on points of shape (..., n), or None for the
    zero closure.  The lattice is symmetric about the origin; ``values`` has
    shape (m,) for n=1 and (m, m) for n=2 with m = 2R/h + 1.
    """

    n: int
    h: float
    box_radius: float
    values: np.ndarray
    far_field: Optional[Callable[[np.ndarray], np.ndarray]] = None
    far_field_label: str = "zero"
    allow_unset: bool = False  # NaN marks nodes outside the evaluated region

    def __post_init__(self):
        m = int(round(2 * self.box_radius / self.h)) + 1
        expected = (m,) if self.n == 1 else (m, m)
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape} != lattice shape {expected}")
        if not self.allow_unset and not np.all(np.isfinite(self.values)):
            bad = np.argwhere(~np.isfinite(self.values))[0]
            raise ValueError(f"non-finite value at lattice node index {tuple(bad)}")

    @property
    def num_per_axis(self) -> int:
        return int(round(2 * self.box_radius / self.h)) + 1

    @property
    def center_index(self) -> int:
        return self.num_per_axis // 2

    def axis_coords(self) -> np.ndarray:
        m = self.num_per_axis
        return (np.arange(m) - self.center_index) * self.h

    def points(self) -> np.ndarray:
        """All lattice points, shape (m, 1) or (m, m, 2)."""
        c = self.axis_coords()
        if self.n == 1:
            return c[:, None]
        X, Y = np.meshgrid(c, c, indexing="ij")
        return np.stack([X, Y], axis=-1)

    def closure(self, pts: np.ndarray) -> np.ndarray:
        """Far-field values at arbitrary points."""
        if self.far_field is None:
            return np.zeros(np.shape(pts)[:-1])
        return self.far_field(pts)

    def with_values(self, values: np.ndarray, allow_unset: bool = False) -> "GridFunction":
        return GridFunction(self.n, self.h, self.box_radius, values,
                            self.far_field, self.far_field_label, allow_unset)


def sample_to_grid(f: Callable[[np.ndarray], np.ndarray], n: int, box_radius: float,
                   h: float, far_field: Optional[Callable] = None,
                   far_field_label: str = "zero") -> GridFunction:
    """Sample an analytic callable onto the lattice; exact at nodes."""
    m = int(round(2 * box_radius / h)) + 1
    if abs((m - 1) * h - 2 * box_radius) > 1e-9 * max(1.0, box_radius):
        raise ValueError("h must divide the box radius")
    c = (np.arange(m) - m // 2) * h
    if n == 1:
        vals = np.asarray(f(c[:, None]), dtype=float)
    else:
        X, Y = np.meshgrid(c, c, indexing="ij")
        vals = np.asarray(f(np.stack([X, Y], axis=-1)), dtype=float)
    if not np.all(np.isfinite(vals)):
        bad = np.argwhere(~np.isfinite(vals))[0]
        coord = c[bad] if n == 1 else (c[bad[0]], c[bad[1]])
        raise ValueError(f"non-finite sample at node {coord}")
    return GridFunction(n, h, box_radius, vals, far_field, far_field_label)


# ---------------------------------------------------------------------------
# problem spec


@dataclass(frozen=True)
class ProblemSpec:
    """Full problem instance: operator order, data, and truncation params."""

    n: int
    sigma: float
    F: Nonlinearity
    g: Forcing
    phi: BoundaryDatum
    R_dom: float
    h: float
    rho_tail: float = 0.0  # 0 means default R_dom / 2

    def __post_init__(self):
        if not (1.0 < self.sigma < 2.0):
            raise ValueError(f"sigma={self.sigma} outside the admissible range (1,2)")
        if self.n not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if self.R_dom < 10 * self.h:
            raise ValueError("box radius must cover at least 10 grid spacings")
        m = self.R_dom / self.h
        if abs(m - round(m)) > 1e-9:
            raise ValueError("h must divide R_dom")
        if self.rho_tail == 0.0:
            object.__setattr__(self, "rho_tail", self.R_dom / 2.0)
        if not (self.h < 1.0 <= self.rho_tail <= self.R_dom):
            raise ValueError("need h < 1 <= rho_tail <= R_dom")

    def phi_grid(self) -> GridFunction:
        return sample_to_grid(self.phi.eval, self.n, self.R_dom, self.h,
                              far_field=self.phi.eval, far_field_label="phi")


# ---------------------------------------------------------------------------
# validation of the structural conditions


@dataclass(frozen=True)
class ConditionResult:
    cond_id: str
    passed: bool
    detail: str
    witness: Optional[dict] = None


@dataclass(frozen=True)
class ValidationReport:
    results: tuple
    sampling_note: str

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failed(self):
        return [r for r in self.results if not r.passed]

    def as_dict(self):
        return {
            "all_passed": self.all_passed,
            "sampling": self.sampling_note,
            "conditions": [
                {"id": r.cond_id, "passed": r.passed, "detail": r.detail,
                 "witness": r.witness}
                for r in self.results
            ],
        }


def _t_sample_grid():
    # logarithmic grid on [-1e3, 1e3] plus 0
    mags = np.logspace(-6, 3, 181)
    return np.concatenate([-mags[::-1], [0.0], mags])


def validate_problem(spec: ProblemSpec) -> ValidationReport:
    """Sampled check of every structural condition on (F, g, phi).

    Checks are finite witnesses of universally quantified conditions:
    t on a log grid in [-1e3, 1e3], x on (a subsample of) the lattice.
    """
    F, g, phi = spec.F, spec.g, spec.phi
    results = []
    ts = _t_sample_grid()
    slack = 1e-9

    # F(0) = 0
    v0 = float(F(0.0))
    results.append(ConditionResult(
        "F_vanishes_at_zero", abs(v0) <= 1e-12,
        f"F(0) = {v0:.3e}", None if abs(v0) <= 1e-12 else {"F(0)": v0}))

    # Lipschitz bound of F on sampled pairs
    Fv = F(ts)
    ratios = np.abs(np.diff(Fv)) / np.diff(ts)
    bad = np.argmax(ratios)
    ok = bool(np.all(ratios <= F.lip_bound * (1 + slack)))
    results.append(ConditionResult(
        "F_lipschitz", ok,
        f"max sampled slope {ratios.max():.6g} vs bound {F.lip_bound:g}",
        None if ok else {"t": float(ts[bad]), "slope": float(ratios[bad])}))

    # F' > 0
    dv = F.deriv(ts)
    ok = bool(np.all(dv > 0))
    bad = int(np.argmin(dv))
    results.append(ConditionResult(
        "F_strictly_increasing", ok,
        f"min sampled F' = {dv.min():.6g}",
        None if ok else {"t": float(ts[bad]), "deriv": float(dv[bad])}))

    # uniform ellipticity window, only when a positive lower bound is claimed
    if F.ellipticity_lower > 0:
        lo, up = F.ellipticity_lower, F.ellipticity_upper
        ok = bool(np.all((dv >= lo * (1 - slack)) & (dv <= up * (1 + slack))))
        results.append(ConditionResult(
            "F_uniform_ellipticity", ok,
            f"sampled F' in [{dv.min():.6g}, {dv.max():.6g}] vs [{lo:g}, {up:g}]",
            None if ok else {"min": float(dv.min()), "max": float(dv.max())}))

    # lattice subsample for x-dependent checks
    coords = np.linspace(-spec.R_dom, spec.R_dom, 41)
    if spec.n == 1:
        xs = coords[:, None]
    else:
        xs = np.stack([coords, 0.4 * coords[::-1]], axis=-1)

    # g(x, 0) = 0
    g0 = g.eval(xs, np.zeros(len(xs)))
    ok = bool(np.all(np.abs(g0) <= 1e-12))
    bad = int(np.argmax(np.abs(g0)))
    results.append(ConditionResult(
        "g_vanishes_at_zero", ok, f"max |g(x,0)| = {np.abs(g0).max():.3e}",
        None if ok else {"x": xs[bad].tolist(), "g": float(g0[bad])}))

    # monotone rate in t
    x_mid = xs[len(xs) // 2][None, :]
    gt = g.eval(np.broadcast_to(x_mid, (len(ts), spec.n)), ts)
    incr = np.diff(gt) - g.monotone_rate * np.diff(ts)
    ok = bool(np.all(incr >= -slack * np.maximum(1.0, np.abs(gt[:-1]))))
    bad = int(np.argmin(incr))
    results.append(ConditionResult(
        "g_monotone_rate", ok,
        f"min (g(t)-g(s) - mu(t-s)) over sampled pairs = {incr.min():.3e}",
        None if ok else {"s": float(ts[bad]), "t": float(ts[bad + 1]),
                         "deficit": float(incr[bad])}))

    # Lipschitz in x at a few t levels
    worst = 0.0
    wit = None
    for tval in (-10.0, -1.0, 0.5, 10.0):
        gx = g.eval(xs, np.full(len(xs), tval))
        dx = np.linalg.norm(np.diff(xs, axis=0), axis=-1)
        r = np.abs(np.diff(gx)) / dx
        if r.max() > worst:
            worst = float(r.max())
            wit = {"t": tval, "slope": float(r.max())}
    ok = worst <= g.x_lip * (1 + slack) + slack
    results.append(ConditionResult(
        "g_lipschitz_in_x", ok,
        f"max sampled x-slope {worst:.6g} vs bound {g.x_lip:g}",
        None if ok else wit))

    # 0 <= D^2 phi <= L3 as quadratic forms
    H = phi.hess(xs)
    eigs = np.linalg.eigvalsh(H) if spec.n > 1 else H[..., 0, 0][..., None]
    ok = bool(np.all(eigs >= -slack) and np.all(eigs <= phi.hess_bound + slack))
    bad = int(np.argmax(np.abs(eigs).max(axis=-1)))
    results.append(ConditionResult(
        "phi_convex_hessian_bounded", ok,
        f"sampled Hessian eigenvalues in [{eigs.min():.6g}, {eigs.max():.6g}]"
        f" vs [0, {phi.hess_bound:g}]",
        None if ok else {"x": xs[bad].tolist()}))

    # |grad phi| <= L4
    gn = np.linalg.norm(phi.grad(xs), axis=-1)
    ok = bool(np.all(gn <= phi.lip_bound + slack))
    results.append(ConditionResult(
        "phi_gradient_bounded", ok,
        f"max sampled |grad phi| = {gn.max():.6g} vs {phi.lip_bound:g}", None))

    # kernel-weighted L1 norm finite and refinement-stable
    l5, gap = phi.kernel_weighted_l1(spec.n, spec.sigma)
    ok = np.isfinite(l5) and gap <= 1e-6
    results.append(ConditionResult(
        "phi_kernel_integrable", bool(ok),
        f"kernel-weighted L1 norm = {l5:.8g} (refinement gap {gap:.2e})",
        None if ok else {"value": float(l5), "gap": float(gap)}))

    # cone closeness: |phi - cone| <= C |x|^(-eps) for |x| >= 10
    eps_c, C_c = phi.perturbation_decay
    rr = np.linspace(10.0, max(100.0, spec.R_dom), 41)
    pr = rr[:, None] if spec.n == 1 else np.stack([rr, np.zeros_like(rr)], axis=-1)
    eta = np.abs(phi.eval(pr) - phi.cone(pr))
    bound = C_c * rr ** (-eps_c)
    ok = bool(np.all(eta <= bound + slack))
    results.append(ConditionResult(
        "phi_close_to_cone", ok,
        f"max |phi - cone| / bound on |x| in [10, {rr[-1]:g}] = "
        f"{np.max(eta / np.maximum(bound, 1e-300)):.4g}",
        None))

    note = ("t sampled on +/- logspace(1e-6, 1e3, 181); x on 41 points spanning "
            "the box; cone decay sampled on |x| in [10, max(100, R_dom)]")
    return ValidationReport(tuple(results), note)
