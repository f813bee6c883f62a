"""Render static PNG figures from an artifact directory.

Each figure is a pure view of one or two CSV files: the renderer parses the
text, plots the parsed floats, and records the extrema of the plotted
columns so callers can check them bit-for-bit against the source files.
"""

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


class RenderError(Exception):
    """Malformed artifact input (missing column, bad header, bad value)."""


@dataclass
class FigureResult:
    name: str
    path: Optional[str]          # None when skipped
    note: str = ""
    extrema: Dict[str, float] = field(default_factory=dict)

    @property
    def rendered(self) -> bool:
        return self.path is not None


def _read_csv(in_dir: str, fname: str, columns: List[str]):
    """Read named columns from a CSV artifact.

    Returns a dict column -> list of floats (blank fields become NaN).
    Raises RenderError naming the file and the missing column.
    """
    path = os.path.join(in_dir, fname)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in columns:
            if col not in header:
                raise RenderError(
                    f"{fname}: missing column '{col}' (header: {header})")
        out = {col: [] for col in columns}
        for row in reader:
            for col in columns:
                cell = row[col]
                try:
                    out[col].append(float("nan") if cell == ""
                                    else float(cell))
                except ValueError:
                    raise RenderError(
                        f"{fname}: column '{col}' has non-numeric "
                        f"value {cell!r}")
    return out


def _extrema(columns: Dict[str, List[float]]) -> Dict[str, float]:
    out = {}
    for col, vals in columns.items():
        finite = [v for v in vals if math.isfinite(v)]
        if finite:
            out[f"{col}_min"] = min(finite)
            out[f"{col}_max"] = max(finite)
    return out


def _save(fig, in_dir: str, name: str) -> str:
    path = os.path.join(in_dir, f"fig_{name}.png")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


# ---------------------------------------------------------------------------
# figure builders


def _fig_solution(in_dir):
    sol = _read_csv(in_dir, "solution.csv", ["x", "u", "phi"])
    bar = _read_csv(in_dir, "barrier_profile.csv", ["x", "ubar"])
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(sol["x"], sol["phi"], "--", color="gray", label="phi (sub)")
    ax.plot(bar["x"], bar["ubar"], ":", color="firebrick",
            label="ubar (super)")
    ax.plot(sol["x"], sol["u"], color="C0", label="u")
    ax.set_xlabel("x")
    ax.set_ylabel("value")
    ax.set_title("solution between barriers")
    ax.legend()
    return FigureResult("solution", _save(fig, in_dir, "solution"),
                        extrema=_extrema({"u": sol["u"], "phi": sol["phi"],
                                          "ubar": bar["ubar"]}))


def _fig_residuals(in_dir):
    res = _read_csv(in_dir, "residuals.csv", ["iter", "residual"])
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.semilogy(res["iter"], res["residual"], marker="o")
    ax.set_xlabel("iteration")
    ax.set_ylabel("sup-norm residual")
    ax.set_title("residual history")
    ax.grid(True, which="both", alpha=0.3)
    return FigureResult("residuals", _save(fig, in_dir, "residuals"),
                        extrema=_extrema({"residual": res["residual"]}))


def _fig_continuation(in_dir):
    tr = _read_csv(in_dir, "trace.csv", ["k", "eps", "gap"])
    rows = [(e, g) for e, g in zip(tr["eps"], tr["gap"])
            if math.isfinite(g)]
    if len(rows) <= 1:
        return FigureResult(
            "continuation", None,
            note="trace.csv has <= 1 continuation leg with a gap; skipped")
    eps = [r[0] for r in rows]
    gap = [r[1] for r in rows]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.loglog(eps, gap, marker="s")
    ax.set_xlabel("eps (slope floor)")
    ax.set_ylabel("leg-to-leg gap")
    ax.set_title("continuation trace")
    ax.grid(True, which="both", alpha=0.3)
    return FigureResult("continuation", _save(fig, in_dir, "continuation"),
                        extrema=_extrema({"eps": eps, "gap": gap}))


def _fig_holder(in_dir):
    tab = _read_csv(in_dir, "holder.csv", ["scale", "max_quotient"])
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.loglog(tab["scale"], tab["max_quotient"], marker="o")
    ax.set_xlabel("shift scale")
    ax.set_ylabel("max scaled quotient")
    ax.set_title("Holder seminorm per scale")
    ax.grid(True, which="both", alpha=0.3)
    return FigureResult("holder", _save(fig, in_dir, "holder"),
                        extrema=_extrema({"scale": tab["scale"],
                                          "max_quotient":
                                          tab["max_quotient"]}))


def _fig_conedecay(in_dir):
    tab = _read_csv(in_dir, "conedecay.csv", ["radius", "value"])
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.loglog(tab["radius"], tab["value"], marker="o", label="I[phi] on ray")
    ax.set_xlabel("radius")
    ax.set_ylabel("operator value")
    ax.set_title("cone decay along a ray")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    return FigureResult("conedecay", _save(fig, in_dir, "conedecay"),
                        extrema=_extrema({"radius": tab["radius"],
                                          "value": tab["value"]}))


def _fig_convergence(in_dir):
    tab = _read_csv(in_dir, "convergence.csv",
                    ["h", "diff_to_next", "observed_order"])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    ax1.loglog(tab["h"], tab["diff_to_next"], marker="o")
    ax1.set_xlabel("h")
    ax1.set_ylabel("diff to next level")
    ax1.grid(True, which="both", alpha=0.3)
    rows = [(h, o) for h, o in zip(tab["h"], tab["observed_order"])
            if math.isfinite(o)]
    if rows:
        ax2.semilogx([r[0] for r in rows], [r[1] for r in rows], marker="s")
    ax2.set_xlabel("h")
    ax2.set_ylabel("observed order")
    ax2.grid(True, which="both", alpha=0.3)
    fig.suptitle("grid convergence")
    return FigureResult("convergence", _save(fig, in_dir, "convergence"),
                        extrema=_extrema({"h": tab["h"],
                                          "diff_to_next":
                                          tab["diff_to_next"]}))


FIGURES = {
    "solution": _fig_solution,
    "residuals": _fig_residuals,
    "continuation": _fig_continuation,
    "holder": _fig_holder,
    "conedecay": _fig_conedecay,
    "convergence": _fig_convergence,
}


def render(in_dir: str, figs: Optional[List[str]] = None
           ) -> List[FigureResult]:
    """Render the requested figures from an artifact directory.

    `figs=None` means all. A figure whose input file is absent is skipped
    with a note; a malformed input raises RenderError.
    """
    manifest = os.path.join(in_dir, "manifest.json")
    if not os.path.isfile(manifest):
        raise RenderError(f"{in_dir}: no manifest.json; not an artifact "
                          "directory")
    with open(manifest) as fh:
        json.load(fh)   # malformed manifest is a hard error

    names = list(FIGURES) if figs is None else list(figs)
    for name in names:
        if name not in FIGURES:
            raise RenderError(f"unknown figure '{name}' "
                              f"(choices: {', '.join(FIGURES)})")
    results = []
    for name in names:
        try:
            results.append(FIGURES[name](in_dir))
        except FileNotFoundError as exc:
            results.append(FigureResult(
                name, None,
                note=f"missing input {os.path.basename(exc.filename)}; "
                     "skipped"))
    return results
