"""Flat key=value config files describing a problem instance.

Format: UTF-8 text, one ``key = value`` per line, ``#`` starts a comment.
Recognized keys:

    n, sigma                        problem dimension and kernel order
    F.kind, F.s1, F.s2, F.s3,       nonlinearity selector and parameters
    F.a, F.b, F.base, F.amp,
    F.scale
    g.kind, g.mu                    forcing selector and monotonicity rate
    phi.kind, phi.slope             boundary datum
    grid.R, grid.h                  box radius and spacing
    tail.rho                        far-field cutoff (default grid.R / 2)

Unknown keys are rejected with the offending line number.
"""

from __future__ import annotations

from typing import Dict, Optional

from .model import (ProblemSpec, make_boundary_datum, make_forcing,
                    make_nonlinearity)

_KNOWN_KEYS = {
    "n", "sigma",
    "F.kind", "F.s1", "F.s2", "F.s3", "F.a", "F.b",
    "F.base", "F.amp", "F.scale",
    "g.kind", "g.mu",
    "phi.kind", "phi.slope",
    "grid.R", "grid.h",
    "tail.rho",
}


class ConfigError(ValueError):
    """Malformed or unknown config content."""


def parse_config_text(text: str) -> Dict[str, str]:
    """Parse key=value lines into a string dict; validates key names."""
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _get(d: Dict[str, str], key: str, default: Optional[str] = None) -> str:
    if key in d:
        return d[key]
    if default is None:
        raise ConfigError(f"missing required key {key!r}")
    return default


def load_problem(path: str) -> ProblemSpec:
    """Read a config file and build the corresponding ProblemSpec."""
    with open(path, encoding="utf-8") as fh:
        return problem_from_dict(parse_config_text(fh.read()))


def problem_from_dict(d: Dict[str, str]) -> ProblemSpec:
    try:
        n = int(_get(d, "n", "1"))
        sigma = float(_get(d, "sigma"))
        R_dom = float(_get(d, "grid.R"))
        h = float(_get(d, "grid.h"))
        rho = float(_get(d, "tail.rho", str(R_dom / 2.0)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    f_kind = _get(d, "F.kind", "identity")
    f_params = {}
    if f_kind == "smooth_piecewise_slopes":
        f_params = dict(
            s1=float(_get(d, "F.s1")), s2=float(_get(d, "F.s2")),
            s3=float(_get(d, "F.s3")),
            a=float(_get(d, "F.a")), b=float(_get(d, "F.b")),
        )
    elif f_kind == "arctan_scaled":
        f_params = dict(
            base=float(_get(d, "F.base", "1.0")),
            amp=float(_get(d, "F.amp", "1.0")),
            scale=float(_get(d, "F.scale", "1.0")),
        )
    elif f_kind == "concave_soft":
        f_params = dict(scale=float(_get(d, "F.scale", "1.0")))
    F = make_nonlinearity(f_kind, **f_params)

    g_kind = _get(d, "g.kind", "linear")
    g = make_forcing(g_kind, mu=float(_get(d, "g.mu", "1.0")))

    phi = make_boundary_datum(_get(d, "phi.kind", "smoothed_cone"),
                              slope=float(_get(d, "phi.slope", "1.0")), n=n)

    return ProblemSpec(n=n, sigma=sigma, F=F, g=g, phi=phi,
                       R_dom=R_dom, h=h, rho_tail=rho)
