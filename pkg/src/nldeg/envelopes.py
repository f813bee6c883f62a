"""Quadratic sup/inf envelopes (sup-convolution regularization).

The sup envelope is u^eps(x) = sup_y (u(y) - |y-x|^2/eps); any maximizer
y* satisfies |y* - x|^2 <= 2 eps ||u||_inf, so the discrete maximization is
restricted to that window (plus one-cell slack).  Argmax points are kept
exact so the touching-parabola diagnostic is a strict identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GridFunction


@dataclass(frozen=True)
class EnvelopeResult:
    env: GridFunction
    argpoint: np.ndarray      # lattice-index offsets of the maximizer, (..., n)
    eps_env: float
    is_sup: bool


def _window_offsets(n: int, w: int) -> np.ndarray:
    """Offsets of the search window ordered by distance (nearest first,
    so flat regions keep argpoint = x)."""
    r = np.arange(-w, w + 1)
    if n == 1:
        offs = r[:, None]
    else:
        A, B = np.meshgrid(r, r, indexing="ij")
        offs = np.stack([A.ravel(), B.ravel()], axis=-1)
    order = np.argsort(np.sum(offs * offs, axis=-1), kind="stable")
    return offs[order]


def sup_envelope(u: GridFunction, eps_env: float) -> EnvelopeResult:
    """Discrete sup envelope over the lattice with exact argmax tracking."""
    if eps_env <= 0:
        raise ValueError("eps_env must be positive")
    vmax = float(np.max(np.abs(u.values)))
    radius = np.sqrt(2.0 * eps_env * vmax) + 2.0 * u.h
    if radius > u.box_radius / 2.0:
        raise ValueError(
            f"envelope search radius {radius:.3g} exceeds half the box; "
            "increase the box radius or decrease eps_env")
    w = int(np.ceil(radius / u.h))
    offs = _window_offsets(u.n, w)

    vals = u.values
    best = vals.copy()                      # offset 0 is the first candidate
    arg = np.zeros(vals.shape + (u.n,), dtype=np.int64)
    m = u.num_per_axis
    for d in offs:
        if not np.any(d):
            continue
        pen = (float(np.dot(d, d)) * u.h**2) / eps_env
        # candidate u(x + d h) - |d h|^2 / eps, clipped at the box edge
        src = [slice(max(d[i], 0), m + min(d[i], 0)) for i in range(u.n)]
        dst = [slice(max(-d[i], 0), m + min(-d[i], 0)) for i in range(u.n)]
        cand = vals[tuple(src)] - pen
        sl = tuple(dst)
        better = cand > best[sl]
        if np.any(better):
            best[sl] = np.where(better, cand, best[sl])
            arg[sl] = np.where(better[..., None], d[None, :], arg[sl])
    return EnvelopeResult(env=u.with_values(best), argpoint=arg,
                          eps_env=eps_env, is_sup=True)


def inf_envelope(u: GridFunction, eps_env: float) -> EnvelopeResult:
    """Discrete inf envelope, via the duality u_eps = -(-u)^eps."""
    res = sup_envelope(u.with_values(-u.values), eps_env)
    return EnvelopeResult(env=u.with_values(-res.env.values),
                          argpoint=res.argpoint, eps_env=eps_env, is_sup=False)


def check_touching_parabola(res: EnvelopeResult, u: GridFunction, x) -> bool:
    """Verify the parabola through the recorded argmax touches the envelope.

    P(z) = u(x*) - |z - x*|^2/eps (sup case) must satisfy P <= env + 1e-12
    on the search neighborhood and P(x) = env(x) to the last bit.
    """
    x = np.asarray(x, dtype=float).reshape(u.n)
    idx = tuple(np.rint(x / u.h).astype(int) + u.center_index)
    sgn = 1.0 if res.is_sup else -1.0
    vals = sgn * u.values
    env = sgn * res.env.values
    d = res.argpoint[idx]
    star = tuple(np.asarray(idx) + d)
    pen_at_x = (float(np.dot(d, d)) * u.h**2) / res.eps_env
    if vals[star] - pen_at_x != env[idx]:
        return False
    # dominance on the window around x
    m = u.num_per_axis
    w = int(np.ceil(np.sqrt(2 * res.eps_env * np.max(np.abs(vals))) / u.h)) + 2
    lo = [max(0, star[i] - w) for i in range(u.n)]
    hi = [min(m, star[i] + w + 1) for i in range(u.n)]
    sl = tuple(slice(lo[i], hi[i]) for i in range(u.n))
    grids = np.meshgrid(*[np.arange(lo[i], hi[i]) for i in range(u.n)],
                        indexing="ij")
    dist2 = sum((g - s) ** 2 for g, s in zip(grids, star)) * u.h**2
    P = vals[star] - dist2 / res.eps_env
    return bool(np.all(P <= env[sl] + 1e-12))
