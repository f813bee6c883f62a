import os

import pytest

from nldeg.cli import main as nldeg_main

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, os.pardir,
                       "configs")


@pytest.fixture(scope="session")
def regression_artifacts(tmp_path_factory):
    """Full artifact set for the coarse regression config."""
    out = tmp_path_factory.mktemp("regression_art")
    cfg = os.path.join(CONFIGS, "regression_coarse.cfg")
    for cmd in ("validate", "solve", "barriers", "verify"):
        assert nldeg_main([cmd, "--config", cfg, "--out", str(out)]) == 0
    assert nldeg_main(["convergence", "--config", cfg, "--out", str(out),
                       "--levels", "3"]) == 0
    return out


@pytest.fixture(scope="session")
def degenerate_artifacts(tmp_path_factory):
    """Solve artifacts for the continuation family (multi-leg trace.csv)."""
    out = tmp_path_factory.mktemp("degenerate_art")
    cfg = os.path.join(CONFIGS, "degenerate.cfg")
    assert nldeg_main(["solve", "--config", cfg, "--out", str(out)]) == 0
    return out
