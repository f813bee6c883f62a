import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import nldeg as nd
from nldeg.model import GridFunction, sample_to_grid, validate_problem


# ---------------------------------------------------------------------------
# nonlinearities


def test_identity_nonlinearity():
    F = nd.make_nonlinearity("identity")
    t = np.linspace(-5, 5, 11)
    assert np.allclose(F(t), t)
    assert np.allclose(F.deriv(t), 1.0)
    assert F.lip_bound == F.ellipticity_lower == F.ellipticity_upper == 1.0


def test_piecewise_slopes_values():
    F = nd.make_nonlinearity("smooth_piecewise_slopes",
                             s1=1e5, s2=1.0, s3=1e-5, a=0.01, b=100.0)
    assert float(F(0.0)) == 0.0
    # slopes away from the mollified corners
    for t, s in ((0.004, 1e5), (1.0, 1.0), (200.0, 1e-5)):
        assert float(F.deriv(t)) == pytest.approx(s, rel=1e-12)
        assert float(F.deriv(-t)) == pytest.approx(s, rel=1e-12)
    # odd symmetry and continuity across the corner
    t = np.linspace(-0.05, 0.05, 2001)
    v = np.asarray(F(t))
    assert np.allclose(v, -np.asarray(F(-t)), atol=1e-12)
    assert np.max(np.abs(np.diff(v))) < 1e5 * (t[1] - t[0]) * 1.01


def test_piecewise_slopes_rejections():
    with pytest.raises(ValueError, match="slope"):
        nd.make_nonlinearity("smooth_piecewise_slopes",
                             s1=-1.0, s2=1.0, s3=1.0, a=0.01, b=100.0)
    with pytest.raises(ValueError, match="threshold"):
        nd.make_nonlinearity("smooth_piecewise_slopes",
                             s1=1.0, s2=1.0, s3=1.0, a=2.0, b=1.0)


@settings(max_examples=50, deadline=None)
@given(t1=st.floats(-150, 150), t2=st.floats(-150, 150))
def test_piecewise_slopes_monotone(t1, t2):
    F = nd.make_nonlinearity("smooth_piecewise_slopes",
                             s1=1e5, s2=1.0, s3=1e-5, a=0.01, b=100.0)
    lo, hi = min(t1, t2), max(t1, t2)
    assert float(F(hi)) >= float(F(lo)) - 1e-12


def test_concave_soft():
    F = nd.make_nonlinearity("concave_soft", scale=1.0)
    assert float(F(0.0)) == 0.0
    assert float(F.deriv(0.0)) == 1.0
    assert F.concave_on_positive
    t = np.linspace(0.1, 10, 100)
    assert np.all(np.diff(np.asarray(F.deriv(t))) < 0)  # concave: F' falls


def test_arctan_scaled_bounds():
    F = nd.make_nonlinearity("arctan_scaled", base=0.5, amp=1.0, scale=1.0)
    t = np.linspace(-50, 50, 1001)
    d = np.asarray(F.deriv(t))
    assert np.all(d >= F.ellipticity_lower - 1e-12)
    assert np.all(d <= F.ellipticity_upper + 1e-12)


def test_unknown_kind_rejected():
    with pytest.raises(ValueError, match="unknown"):
        nd.make_nonlinearity("no_such_family")


# ---------------------------------------------------------------------------
# forcing


def test_linear_forcing():
    g = nd.make_forcing("linear", mu=2.0)
    x = np.zeros((3, 1))
    assert np.allclose(g.eval(x, np.array([1.0, -1.0, 0.0])), [2.0, -2.0, 0.0])
    assert g.monotone_rate == 2.0 and not g.superlinear


def test_linear_cubic_forcing():
    g = nd.make_forcing("linear_cubic", mu=1.0)
    x = np.zeros((1, 1))
    assert float(g.eval(x, np.array([2.0]))[0]) == pytest.approx(10.0)
    assert g.superlinear


# ---------------------------------------------------------------------------
# boundary data


def test_smoothed_cone_datum():
    phi = nd.make_boundary_datum("smoothed_cone", slope=2.0, n=1)
    x = np.array([[3.0]])
    assert float(phi.eval(x)[0]) == pytest.approx(2.0 * np.sqrt(10.0))
    # gradient bounded by the slope, Hessian positive
    assert abs(float(phi.grad(x)[0, 0])) <= 2.0
    assert float(phi.hess(x)[0, 0, 0]) > 0


def test_flat_plus_bump_rejected():
    with pytest.raises(ValueError, match="convex"):
        nd.make_boundary_datum("flat_plus_bump", n=1)


def test_kernel_weighted_l1_finite():
    phi = nd.make_boundary_datum("smoothed_cone", slope=1.0, n=1)
    val, gap = phi.kernel_weighted_l1(1, 1.5)
    assert np.isfinite(val) and val > 0
    assert gap < 1e-6


# ---------------------------------------------------------------------------
# grids


def test_grid_function_shape_and_closure():
    u = sample_to_grid(lambda p: p[..., 0] ** 2, 1, 2.0, 0.5,
                       far_field=lambda p: p[..., 0] ** 2)
    assert u.num_per_axis == 9
    assert u.values[u.center_index] == 0.0
    assert float(u.closure(np.array([[10.0]]))[0]) == 100.0


def test_grid_function_rejects_nonfinite():
    with pytest.raises(ValueError):
        GridFunction(1, 0.5, 2.0, np.full(9, np.nan))


def test_grid_function_allow_unset():
    g = GridFunction(1, 0.5, 2.0, np.full(9, np.nan), allow_unset=True)
    assert np.all(np.isnan(g.values))


# ---------------------------------------------------------------------------
# problem spec + validation


def test_problem_spec_bounds():
    phi = nd.make_boundary_datum("smoothed_cone", slope=1.0, n=1)
    F = nd.make_nonlinearity("identity")
    g = nd.make_forcing("linear")
    with pytest.raises(ValueError, match=r"\(1,2\)"):
        nd.ProblemSpec(n=1, sigma=2.0, F=F, g=g, phi=phi, R_dom=20.0, h=0.05)
    with pytest.raises(ValueError):
        nd.ProblemSpec(n=3, sigma=1.5, F=F, g=g, phi=phi, R_dom=20.0, h=0.05)
    sp = nd.ProblemSpec(n=1, sigma=1.5, F=F, g=g, phi=phi, R_dom=20.0, h=0.05)
    assert sp.rho_tail == 10.0  # default R/2


def test_validate_problem_passes(regression_spec):
    report = validate_problem(regression_spec)
    assert report.all_passed, [r.cond_id for r in report.failed()]
    ids = {r.cond_id for r in report.results}
    assert "F_strictly_increasing" in ids
    assert "phi_close_to_cone" in ids


def test_validate_problem_flags_pure_cubic(regression_spec):
    from dataclasses import replace
    sp = replace(regression_spec, g=nd.make_forcing("pure_cubic", mu=1.0))
    report = validate_problem(sp)
    failed = {r.cond_id for r in report.failed()}
    assert "g_monotone_rate" in failed
