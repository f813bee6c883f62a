import numpy as np
import pytest

import nldeg as nd
from nldeg.solver import SolverConfig, solve_uniformly_elliptic


@pytest.fixture(scope="session")
def regression_spec():
    """Smoothed cone, identity F, linear g; the shared coarse instance."""
    phi = nd.make_boundary_datum("smoothed_cone", slope=1.0, n=1)
    return nd.ProblemSpec(n=1, sigma=1.5, F=nd.make_nonlinearity("identity"),
                          g=nd.make_forcing("linear", mu=1.0), phi=phi,
                          R_dom=20.0, h=0.05, rho_tail=10.0)


@pytest.fixture(scope="session")
def regression_weights(regression_spec):
    sp = regression_spec
    return nd.build_kernel_weights(sp.n, sp.sigma, sp.h, sp.rho_tail)


@pytest.fixture(scope="session")
def regression_solution(regression_spec, regression_weights):
    return solve_uniformly_elliptic(regression_spec, regression_weights,
                                    SolverConfig(tol_residual=1e-8))
