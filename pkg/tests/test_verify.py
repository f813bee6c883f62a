import numpy as np
import pytest

import nldeg as nd
from nldeg import verify as V
from nldeg.barriers import build_supersolution_superlinear
from nldeg.solver import SolverConfig, solve_uniformly_elliptic


@pytest.fixture(scope="module")
def regression_barrier(regression_spec, regression_weights):
    return build_supersolution_superlinear(regression_spec,
                                           regression_weights,
                                           require_superlinear=False)


# ---------------------------------------------------------------------------
# comparison


def test_comparison_solution_vs_barrier(regression_spec, regression_weights,
                                        regression_solution,
                                        regression_barrier):
    rep = V.comparison_test(regression_solution.u, regression_barrier.profile,
                            regression_spec, regression_weights, tol=1e-6)
    assert rep.passed and rep.max_gap <= 0


def test_comparison_phi_vs_solution(regression_spec, regression_weights,
                                    regression_solution):
    rep = V.comparison_test(regression_spec.phi_grid(), regression_solution.u,
                            regression_spec, regression_weights, tol=1e-6)
    assert rep.passed


def test_comparison_rejects_uncertified(regression_spec, regression_weights,
                                        regression_solution,
                                        regression_barrier):
    # corrupt the supersolution at one interior node: certificate fails
    v = regression_barrier.profile
    bad_vals = v.values.copy()
    bad_vals[v.center_index] -= 6.0
    bad = v.with_values(bad_vals)
    with pytest.raises(ValueError, match="certificate"):
        V.comparison_test(regression_solution.u, bad, regression_spec,
                          regression_weights, tol=1e-6)


def test_comparison_antisymmetry(regression_spec, regression_weights,
                                 regression_solution, regression_barrier):
    # swapping the roles must fail certification (ubar is not a subsolution)
    with pytest.raises(ValueError, match="certificate"):
        V.comparison_test(regression_barrier.profile, regression_solution.u,
                          regression_spec, regression_weights, tol=1e-6)


# ---------------------------------------------------------------------------
# Holder seminorm


def test_holder_constant_zero():
    u = nd.sample_to_grid(lambda p: np.full(p.shape[:-1], 3.0), 1, 5.0, 0.1)
    est, table = V.holder_seminorm(u, 0.25)
    assert est == 0.0 and len(table) >= 3


def test_holder_sqrt_fixture():
    # |x|^(1/2) has beta = 1/2 quotient exactly 1 (difference across 0)
    u = nd.sample_to_grid(lambda p: np.sqrt(np.abs(p[..., 0])), 1, 5.0, 0.01)
    est, _ = V.holder_seminorm(u, 0.5, (0.01, 1.0))
    assert est == pytest.approx(1.0, rel=1e-9)
    # beta above the regularity grows as the smallest scale shrinks
    e_coarse, _ = V.holder_seminorm(u, 0.6, (0.01, 1.0))
    u_fine = nd.sample_to_grid(lambda p: np.sqrt(np.abs(p[..., 0])),
                               1, 5.0, 0.0025)
    e_fine, _ = V.holder_seminorm(u_fine, 0.6, (0.0025, 1.0))
    assert e_fine > e_coarse


def test_holder_homogeneous():
    u = nd.sample_to_grid(lambda p: np.sin(p[..., 0]), 1, 5.0, 0.1)
    e1, _ = V.holder_seminorm(u, 0.25)
    e2, _ = V.holder_seminorm(u.with_values(2.5 * u.values), 0.25)
    assert e2 == 2.5 * e1


def test_holder_rejects_bad_beta():
    u = nd.sample_to_grid(lambda p: np.sin(p[..., 0]), 1, 5.0, 0.1)
    with pytest.raises(ValueError):
        V.holder_seminorm(u, 1.5)


# ---------------------------------------------------------------------------
# difference quotients


def test_quotient_probe_smooth():
    w = nd.sample_to_grid(lambda p: np.exp(-p[..., 0] ** 2), 1, 8.0, 0.01)
    rep = V.difference_quotient_probe(w, 0.25, [0.02, 0.04, 0.08, 0.16])
    assert rep["slope"] == pytest.approx(0.75, abs=0.02)
    assert rep["exceeds_beta"]


def test_quotient_probe_rough():
    w = nd.sample_to_grid(lambda p: np.abs(p[..., 0]) ** 0.3, 1, 8.0, 0.01)
    rep = V.difference_quotient_probe(w, 0.25, [0.02, 0.04, 0.08, 0.16])
    assert rep["slope"] == pytest.approx(0.05, abs=0.01)
    assert rep["empirical_exponent"] == pytest.approx(0.3, abs=0.01)


# ---------------------------------------------------------------------------
# transformed equation


def test_transformed_identity(regression_spec, regression_weights,
                              regression_solution):
    rep = V.transformed_equation_check(regression_solution.u, regression_spec,
                                       regression_weights)
    assert rep["max_defect"] <= 2e-8  # 2 * tol_residual


def test_transformed_arctan(regression_spec, regression_weights):
    from dataclasses import replace
    spec = replace(regression_spec,
                   F=nd.make_nonlinearity("arctan_scaled", scale=1.0))
    rep_solve = solve_uniformly_elliptic(spec, regression_weights,
                                         SolverConfig(tol_residual=1e-8))
    rep = V.transformed_equation_check(rep_solve.u, spec, regression_weights)
    assert rep["max_defect"] <= 1e-7 + rep["consistency_term"]
    assert rep["net_defect"] < rep["max_defect"]


# ---------------------------------------------------------------------------
# convergence


def test_convergence_study(regression_spec, tmp_path):
    csv_path = tmp_path / "conv.csv"
    rows = V.convergence_study(regression_spec, [0.08, 0.04, 0.02],
                               csv_path=str(csv_path),
                               solver_config=SolverConfig(tol_residual=1e-9))
    assert len(rows) == 2
    assert rows[1]["observed_order"] >= 0.7
    assert not rows[1]["non_monotone"]
    assert csv_path.exists()


def test_convergence_study_validation(regression_spec):
    with pytest.raises(ValueError, match="3 grids"):
        V.convergence_study(regression_spec, [0.08, 0.04])
    with pytest.raises(ValueError, match="halve"):
        V.convergence_study(regression_spec, [0.08, 0.05, 0.02])


# ---------------------------------------------------------------------------
# oracle


def test_linear_case_oracle_quick():
    res = V.linear_case_oracle_test(1.5, 0.01)
    assert res["max_rel_error"] <= 1e-3
    assert res["C_sigma"] == pytest.approx(6.684342065682668, rel=1e-7)


def test_oracle_determinism():
    a = V.linear_case_oracle_test(1.5, 0.02)
    b = V.linear_case_oracle_test(1.5, 0.02)
    assert a == b
