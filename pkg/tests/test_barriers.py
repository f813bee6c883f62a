import numpy as np
import pytest

import nldeg as nd
from nldeg.barriers import (build_supersolution_concave,
                            build_supersolution_superlinear,
                            check_subsolution_phi, cone_decay_check,
                            riesz_bump_profile)


def test_subsolution_certificate(regression_spec, regression_weights):
    cert = check_subsolution_phi(regression_spec, regression_weights)
    assert cert.passed
    # convex phi gives a strictly positive operator value
    assert cert.extremum == pytest.approx(1.7102846440976909, rel=1e-6)


def test_superlinear_barrier_cubic_g(regression_spec, regression_weights):
    from dataclasses import replace
    spec = replace(regression_spec, g=nd.make_forcing("linear_cubic", mu=1.0))
    bar = build_supersolution_superlinear(spec, regression_weights)
    assert bar.certificate.passed
    assert bar.M == 2.0          # frozen doubling-search fixture
    assert bar.exponent == pytest.approx(0.25)  # p = (sigma-1)/2
    # sandwich: profile above phi everywhere
    assert np.all(bar.profile.values >= spec.phi_grid().values - 1e-12)


def test_superlinear_barrier_linear_g(regression_spec, regression_weights):
    bar = build_supersolution_superlinear(regression_spec, regression_weights,
                                          require_superlinear=False)
    assert bar.certificate.passed
    assert bar.M == 8.0          # frozen doubling-search fixture


def test_superlinear_requires_growth(regression_spec, regression_weights):
    with pytest.raises(ValueError, match="superlinear"):
        build_supersolution_superlinear(regression_spec, regression_weights)


def test_concave_barrier_restricted_to_n2(regression_spec,
                                          regression_weights):
    from dataclasses import replace
    spec = replace(regression_spec,
                   F=nd.make_nonlinearity("concave_soft", scale=1.0))
    with pytest.raises(ValueError, match="n > sigma"):
        build_supersolution_concave(spec, regression_weights)


@pytest.fixture(scope="module")
def concave_2d_barrier():
    phi = nd.make_boundary_datum("smoothed_cone", slope=1.0, n=2)
    spec = nd.ProblemSpec(n=2, sigma=1.5,
                          F=nd.make_nonlinearity("concave_soft", scale=1.0),
                          g=nd.make_forcing("linear", mu=1.0), phi=phi,
                          R_dom=6.4, h=0.1, rho_tail=3.2)
    W = nd.build_kernel_weights(2, 1.5, 0.1, 3.2)
    return spec, W, build_supersolution_concave(spec, W)


def test_concave_barrier_certifies(concave_2d_barrier):
    spec, W, bar = concave_2d_barrier
    assert bar.certificate.passed
    assert bar.kind == "super_concave"
    assert bar.M == 16.0         # frozen doubling-search fixture
    assert bar.exponent == pytest.approx(0.25)  # tau = min(s-1, n-s)/2
    assert np.all(bar.profile.values >= spec.phi_grid().values - 1e-12)


def test_riesz_bump_profile_shape():
    r_grid, vals, evaluate = riesz_bump_profile(1.5, 2, 0.25)
    assert float(np.max(vals)) == pytest.approx(1.0)  # normalized
    pts = np.array([[0.1, 0.0], [1.0, 0.0], [10.0, 0.0], [100.0, 0.0]])
    v = evaluate(pts)
    assert np.all(v > 0)
    # far field decays like the extrapolation power r^-tau
    assert np.log(v[2] / v[3]) / np.log(10.0) == pytest.approx(0.25, abs=0.1)


def test_cone_decay_slope(regression_spec, regression_weights):
    d = cone_decay_check(regression_spec.phi, 1.5, regression_weights,
                         R_dom=256.0)
    assert not d["degenerate"]
    assert d["slope"] == pytest.approx(-0.5, abs=0.1)
    assert d["nonpositive_nodes"] == []


def test_cone_decay_degenerate_flat(regression_weights):
    phi0 = nd.make_boundary_datum("smoothed_cone", slope=0.0, n=1)
    d = cone_decay_check(phi0, 1.5, regression_weights)
    assert d["degenerate"] and d["slope"] is None
