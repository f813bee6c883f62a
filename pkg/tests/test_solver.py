import numpy as np
import pytest

import nldeg as nd
from nldeg.barriers import build_supersolution_superlinear
from nldeg.solver import (SolverConfig, auto_damping, solve, solve_degenerate,
                          solve_uniformly_elliptic)


@pytest.fixture(scope="module")
def degenerate_spec():
    phi = nd.make_boundary_datum("smoothed_cone", slope=8.0, n=1)
    F = nd.make_nonlinearity("smooth_piecewise_slopes",
                             s1=1e5, s2=1.0, s3=1e-5, a=0.01, b=100.0)
    return nd.ProblemSpec(n=1, sigma=1.5, F=F,
                          g=nd.make_forcing("linear_cubic", mu=1.0),
                          phi=phi, R_dom=20.0, h=0.05, rho_tail=10.0)


def test_auto_damping_fixture(regression_spec, regression_weights):
    tau = auto_damping(regression_spec, regression_weights)
    assert tau == pytest.approx(0.0006929755244887118, rel=1e-12)


def test_auto_damping_monotone(regression_spec, regression_weights):
    from dataclasses import replace
    tau0 = auto_damping(regression_spec, regression_weights)
    # doubling Lambda roughly halves tau
    F2 = nd.make_nonlinearity("custom",
                              eval=lambda t: 2.0 * np.asarray(t, float),
                              deriv=lambda t: 2.0 + 0.0 * np.asarray(t, float),
                              lip_bound=2.0, ellipticity_lower=2.0,
                              ellipticity_upper=2.0)
    tau2 = auto_damping(regression_spec, regression_weights, F=F2)
    assert tau2 < tau0 and tau2 == pytest.approx(tau0 / 2.0, rel=0.01)
    # halving h decreases tau
    W_half = nd.build_kernel_weights(1, 1.5, 0.025, 10.0)
    sp = replace(regression_spec, h=0.025)
    assert auto_damping(sp, W_half) < tau0


def test_trivial_zero_solution():
    phi0 = nd.make_boundary_datum("smoothed_cone", slope=0.0, n=1)
    spec = nd.ProblemSpec(n=1, sigma=1.5, F=nd.make_nonlinearity("identity"),
                          g=nd.make_forcing("linear", mu=1.0), phi=phi0,
                          R_dom=10.0, h=0.1, rho_tail=5.0)
    W = nd.build_kernel_weights(1, 1.5, 0.1, 5.0)
    rep = solve_uniformly_elliptic(spec, W, SolverConfig(tol_residual=1e-10))
    assert np.max(np.abs(rep.u.values)) <= 1e-10
    assert rep.converged


def test_regression_fixture(regression_solution, regression_spec):
    rep = regression_solution
    assert rep.converged and rep.sandwich_violations == 0
    u0 = float(rep.u.values[rep.u.center_index])
    phi0 = float(regression_spec.phi.eval(np.zeros((1, 1)))[0])
    assert u0 - phi0 == pytest.approx(4.495889840578737, abs=1e-6)
    assert u0 - phi0 > 0


def test_uniqueness_from_both_barriers(regression_spec, regression_weights):
    bar = build_supersolution_superlinear(regression_spec, regression_weights,
                                          require_superlinear=False)
    cfg = SolverConfig(tol_residual=1e-8)
    r1 = solve_uniformly_elliptic(regression_spec, regression_weights, cfg,
                                  barrier=bar)
    r2 = solve_uniformly_elliptic(regression_spec, regression_weights, cfg,
                                  u_init=bar.profile, barrier=bar)
    assert np.max(np.abs(r1.u.values - r2.u.values)) <= 1e-6


def test_fixed_point_agrees_with_newton(regression_spec, regression_weights,
                                        regression_solution):
    cfg = SolverConfig(tol_residual=1e-4, use_newton=False, max_iters=200000)
    rep = solve_uniformly_elliptic(regression_spec, regression_weights, cfg)
    assert rep.converged
    assert np.max(np.abs(rep.u.values - regression_solution.u.values)) <= 1e-3


def test_sandwich_invariance(regression_solution, regression_spec):
    u = regression_solution.u
    bar = regression_solution.barrier
    phi_vals = regression_spec.phi_grid().values
    assert np.all(u.values >= phi_vals - 1e-12)
    assert np.all(u.values <= bar.profile.values + 1e-12)


def test_oscillation_detector(regression_spec, regression_weights):
    cfg = SolverConfig(tau_relax=0.002, use_newton=False,
                       clip_to_barriers=False, max_iters=5000)
    with pytest.raises(RuntimeError, match="tau_relax"):
        solve_uniformly_elliptic(regression_spec, regression_weights, cfg)


def test_degenerate_rejected_by_direct_solver(degenerate_spec,
                                              regression_weights):
    from dataclasses import replace
    F0 = nd.make_nonlinearity("concave_soft")  # ellipticity_lower = 0
    sp = replace(degenerate_spec, F=F0)
    with pytest.raises(ValueError, match="degenerate"):
        solve_uniformly_elliptic(sp, regression_weights)


def test_continuation_trace_fixture(degenerate_spec, regression_weights):
    rep = solve_degenerate(degenerate_spec, regression_weights,
                           SolverConfig(tol_residual=1e-8, tol_cont=1e-4))
    gaps = [t["gap"] for t in rep.continuation_trace[1:]]
    assert gaps == pytest.approx([3.0256e-04, 1.5128e-04, 7.5641e-05],
                                 rel=1e-3)
    u0 = float(rep.u.values[rep.u.center_index])
    phi0 = float(degenerate_spec.phi.eval(np.zeros((1, 1)))[0])
    assert u0 - phi0 == pytest.approx(54.413906104295, abs=1e-6)


def test_continuation_collapses_for_elliptic_F(regression_spec,
                                               regression_weights):
    rep = solve_degenerate(regression_spec, regression_weights,
                           SolverConfig(tol_residual=1e-8, tol_cont=1e-4))
    # F' >= 1 >= eps_1, so leg 1 reuses F and the gap collapses
    assert len(rep.continuation_trace) == 2
    assert rep.continuation_trace[1]["gap"] <= 1e-8
    direct = solve_uniformly_elliptic(regression_spec, regression_weights,
                                      SolverConfig(tol_residual=1e-8))
    assert np.max(np.abs(rep.u.values - direct.u.values)) <= 1e-6


def test_dispatch(regression_spec, regression_weights, degenerate_spec):
    rep = solve(regression_spec, regression_weights,
                SolverConfig(tol_residual=1e-8))
    assert rep.continuation_trace == []
    rep2 = solve(degenerate_spec, regression_weights,
                 SolverConfig(tol_residual=1e-8))
    assert len(rep2.continuation_trace) >= 2
