import csv
import math
import shutil

import pytest

from nldeg_plots import FIGURES, RenderError, render
from nldeg_plots.cli import main


def _csv_column(path, col):
    with open(path, newline="") as fh:
        return [float(row[col]) for row in csv.DictReader(fh)
                if row[col] != ""]


def test_render_all_figures(regression_artifacts):
    results = render(str(regression_artifacts))
    assert len(results) == len(FIGURES) == 6
    by_name = {r.name: r for r in results}
    # the direct solve has no continuation legs: that figure is skipped
    assert not by_name["continuation"].rendered
    assert "skipped" in by_name["continuation"].note
    for name, r in by_name.items():
        if name != "continuation":
            assert r.rendered and (regression_artifacts
                                   / f"fig_{name}.png").exists()


def test_plotted_extrema_match_csv(regression_artifacts):
    results = {r.name: r for r in render(str(regression_artifacts))}
    u = _csv_column(regression_artifacts / "solution.csv", "u")
    assert results["solution"].extrema["u_max"] == max(u)
    assert results["solution"].extrema["u_min"] == min(u)
    res = _csv_column(regression_artifacts / "residuals.csv", "residual")
    assert results["residuals"].extrema["residual_max"] == max(res)
    val = _csv_column(regression_artifacts / "conedecay.csv", "value")
    assert results["conedecay"].extrema["value_max"] == max(val)


def test_continuation_figure_from_trace(degenerate_artifacts):
    results = {r.name: r
               for r in render(str(degenerate_artifacts), ["continuation"])}
    r = results["continuation"]
    assert r.rendered
    gaps = [g for g in _csv_column(degenerate_artifacts / "trace.csv", "gap")
            if math.isfinite(g)]
    assert r.extrema["gap_max"] == max(gaps)
    assert r.extrema["gap_min"] == min(gaps)


def test_missing_input_skips_with_note(regression_artifacts, tmp_path):
    part = tmp_path / "partial"
    part.mkdir()
    for name in ("manifest.json", "solution.csv", "barrier_profile.csv"):
        shutil.copy(regression_artifacts / name, part / name)
    results = {r.name: r for r in render(str(part))}
    assert results["solution"].rendered
    assert not results["residuals"].rendered
    assert "residuals.csv" in results["residuals"].note


def test_column_mismatch_names_file_and_column(regression_artifacts,
                                               tmp_path):
    bad = tmp_path / "bad"
    bad.mkdir()
    shutil.copy(regression_artifacts / "manifest.json", bad / "manifest.json")
    lines = (regression_artifacts / "trace.csv").read_text().splitlines()
    (bad / "trace.csv").write_text("\n".join(["k,eps,iters"] + lines[1:]))
    with pytest.raises(RenderError, match=r"trace\.csv.*'gap'"):
        render(str(bad), ["continuation"])


def test_unknown_figure_rejected(regression_artifacts):
    with pytest.raises(RenderError, match="unknown figure"):
        render(str(regression_artifacts), ["bogus"])


def test_not_an_artifact_dir(tmp_path):
    with pytest.raises(RenderError, match="manifest.json"):
        render(str(tmp_path))


def test_cli_render(regression_artifacts, capsys):
    assert main(["render", "--in", str(regression_artifacts),
                 "--figs", "all"]) == 0
    out = capsys.readouterr().out
    assert out.count("wrote ") == 5 and "note: continuation" in out


def test_cli_malformed_exit_code(regression_artifacts, tmp_path, capsys):
    bad = tmp_path / "bad"
    bad.mkdir()
    shutil.copy(regression_artifacts / "manifest.json", bad / "manifest.json")
    (bad / "residuals.csv").write_text("iter,residual\n0,notanumber\n")
    assert main(["render", "--in", str(bad), "--figs", "residuals"]) == 1
    assert "residuals.csv" in capsys.readouterr().err


def test_acceptance_figure_pipeline(regression_artifacts,
                                    degenerate_artifacts):
    reg = {r.name: r for r in render(str(regression_artifacts))}
    cont = render(str(degenerate_artifacts), ["continuation"])[0]
    rendered = sum(r.rendered for r in reg.values()) + cont.rendered
    u = _csv_column(regression_artifacts / "solution.csv", "u")
    bitwise = (reg["solution"].extrema["u_max"] == max(u)
               and reg["solution"].extrema["u_min"] == min(u))
    ok = rendered == 6 and bitwise
    print(f"[{'PASS' if ok else 'FAIL'}] figure pipeline: "
          f"{rendered}/6 figures rendered, plotted u extrema bit-identical "
          f"to solution.csv: {bitwise}")
    assert ok
