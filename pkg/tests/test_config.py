import pytest

from nldeg.config import ConfigError, parse_config_text, problem_from_dict


GOOD = """
# comment
n = 1
sigma = 1.5
F.kind = identity
g.kind = linear
g.mu = 1.0
phi.kind = smoothed_cone
phi.slope = 1.0
grid.R = 20.0
grid.h = 0.05
tail.rho = 10.0
"""


def test_parse_good_config():
    d = parse_config_text(GOOD)
    assert d["sigma"] == "1.5"
    spec = problem_from_dict(d)
    assert spec.sigma == 1.5 and spec.h == 0.05 and spec.rho_tail == 10.0


def test_unknown_key_reports_line_number():
    text = "sigma = 1.5\nbogus.key = 1\n"
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text(text)


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("sigma = 1.5\nsigma = 1.6\n")


def test_missing_equals_rejected():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("sigma 1.5\n")


def test_missing_required_key():
    with pytest.raises(ConfigError, match="sigma"):
        problem_from_dict({"grid.R": "20.0", "grid.h": "0.05"})


def test_default_tail_rho():
    d = parse_config_text(GOOD.replace("tail.rho = 10.0", ""))
    spec = problem_from_dict(d)
    assert spec.rho_tail == 10.0


def test_degenerate_family_config():
    d = parse_config_text("""
sigma = 1.5
F.kind = smooth_piecewise_slopes
F.s1 = 1e5
F.s2 = 1.0
F.s3 = 1e-5
F.a = 0.01
F.b = 100.0
g.kind = linear_cubic
phi.slope = 8.0
grid.R = 20.0
grid.h = 0.05
""")
    spec = problem_from_dict(d)
    assert spec.F.ellipticity_lower == 1e-5
    assert spec.g.superlinear
