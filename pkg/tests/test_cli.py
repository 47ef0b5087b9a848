"""Command line verbs, exit codes, environment overrides and run directories."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from degenfb.cli import main
from degenfb.config import ConfigError, env_overrides, load_config
from degenfb.io import load_field, sha256_file

SMALL_1D = """\
name: small_obstacle
seed: 0
problem:
  scheme: obstacle
  gamma: 1.0
  boundary: {kind: profile, a: 0.1234}
grid: {n_cells: 64, extent: 1.0, dim: 1}
solver: {tol_residual: 1.0e-10}
analysis:
  metrics: [fb, profile_error]
"""


def write_cfg(tmp_path: Path, text: str = SMALL_1D, name: str = "cfg.yaml", **patch) -> Path:
    cfg = yaml.safe_load(text)
    for dotted, value in patch.items():
        node = cfg
        *head, last = dotted.split("__")
        for k in head:
            node = node.setdefault(k, {})
        node[last] = value
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return p


def run_dir(capsys) -> tuple[Path, int]:
    line = capsys.readouterr().out.strip().splitlines()[-1]
    path, code = line.split("\t")
    return Path(path), int(code.split("=")[1])


def test_list_bundled(capsys):
    assert main(["list-bundled"]) == 0
    names = [ln.split("\t")[0] for ln in capsys.readouterr().out.splitlines()]
    assert names == ["alt_phillips_1d", "ellipse_halfplane", "halfplane_2d", "linearized_s05",
                     "obstacle_1d", "perron_disc"]


def test_validate_config(capsys, tmp_path):
    assert main(["validate-config", "--config", "halfplane_2d"]) == 0
    assert capsys.readouterr().out.startswith("ok: halfplane_2d (hash ")
    bad = write_cfg(tmp_path, problem__gamma=3.0)
    assert main(["validate-config", "--config", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "problem.gamma" in err and "(0, 2)" in err


@pytest.mark.parametrize("patch,needle", [
    ({"grid__n_cells": 4}, "n_cells"),
    ({"problem__scheme": "magic"}, "problem.scheme"),
    ({"solver__bogus": 1}, "solver.bogus"),
    ({"problem__boundary": {"kind": "quartic"}}, "linearized"),
])
def test_config_errors_exit_2(capsys, tmp_path, patch, needle):
    cfg = write_cfg(tmp_path, **patch)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 2
    assert needle in capsys.readouterr().err
    assert not (tmp_path / "r" / "manifest.json").exists()


def test_usage_errors_exit_2(capsys):
    assert main([]) == 2
    assert main(["run"]) == 2
    assert main(["explode"]) == 2
    assert main(["run", "--config", "no_such_config_anywhere"]) == 2


def test_env_override(monkeypatch, tmp_path):
    monkeypatch.setenv("DEGENFB_CFG__GRID__N_CELLS", "32")
    monkeypatch.setenv("DEGENFB_CFG__SOLVER__TOL_RESIDUAL", "1e-9")
    monkeypatch.setenv("UNRELATED__GRID__N_CELLS", "7")
    cfg, _ = load_config("obstacle_1d")
    assert cfg["grid"]["n_cells"] == 32 and cfg["solver"]["tol_residual"] == 1e-9
    assert env_overrides({"DEGENFB_CFG__ANALYSIS__R0": "0.25"}) == {"analysis": {"r0": 0.25}}
    monkeypatch.setenv("DEGENFB_CFG__GRID__N_CELLS", "2")
    with pytest.raises(ConfigError, match="n_cells"):
        load_config("obstacle_1d")


def test_run_writes_artifacts(capsys, tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "r"), "--seed", "5"]) == 0
    d, code = run_dir(capsys)
    assert d == tmp_path / "r" and code == 0
    man = json.loads((d / "manifest.json").read_text())
    assert man["exit_code"] == 0 and man["converged"] and man["seed"] == 5
    for name in ("config.yaml", "field.dfb", "field.dfb.meta", "field.vtk", "solve_report.txt",
                 "energy_trace.csv", "metrics.json", "fb_points.txt", "profile_error.json"):
        assert name in man["files"], name
        assert man["files"][name] == sha256_file(d / name)
    report = dict(map(str.strip, ln.split("=", 1))
                  for ln in (d / "solve_report.txt").read_text().splitlines())
    assert report["converged"] == "True" and report["energy_monotone"] == "True"
    trace = np.loadtxt(d / "energy_trace.csv", delimiter=",", skiprows=1)[:, 1]
    assert np.all(np.diff(trace) <= 1e-12 * np.abs(trace[:-1]).clip(1.0))
    metrics = json.loads((d / "metrics.json").read_text())
    h = 1.0 / 32
    assert metrics["profile_error"]["sup_error"] <= 5 * h
    assert metrics["profile_error"]["fb_location_error"] <= 2 * h
    assert load_field(d / "field.dfb").grid.shape == (65,)


def test_fresh_directories_and_determinism(capsys, tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "r"
    main(["run", "--config", str(cfg), "--out", str(out)])
    d0, _ = run_dir(capsys)
    main(["run", "--config", str(cfg), "--out", str(out)])
    d1, _ = run_dir(capsys)
    main(["run", "--config", str(cfg), "--out", str(out)])
    d2, _ = run_dir(capsys)
    assert (d0, d1, d2) == (out, tmp_path / "r-1", tmp_path / "r-2")
    m0 = json.loads((d0 / "manifest.json").read_text())
    m1 = json.loads((d1 / "manifest.json").read_text())
    assert m0["files"] == m1["files"] and m0["config_hash"] == m1["config_hash"]


def test_unconverged_exit_3(capsys, tmp_path):
    cfg = write_cfg(tmp_path, solver__max_iters=3)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 3
    d, _ = run_dir(capsys)
    man = json.loads((d / "manifest.json").read_text())
    assert not man["converged"] and "unconverged_no_analysis" in man["flags"]
    assert "field.dfb" in man["files"] and not (d / "metrics.json").exists()
    cfg2 = write_cfg(tmp_path, name="c2.yaml", solver__max_iters=3,
                     output={"allow_unconverged": True})
    assert main(["run", "--config", str(cfg2), "--out", str(tmp_path / "s")]) == 3
    d, _ = run_dir(capsys)
    man = json.loads((d / "manifest.json").read_text())
    assert "UNCONVERGED" in man["flags"] and (d / "metrics.json").exists()


def test_analysis_failure_exit_4(capsys, tmp_path):
    # constant data 0 has no free boundary; flatness then has no centre
    text = """\
name: empty_fb
problem:
  scheme: degenerate
  gamma: 1.0
  h: {kind: quadratic}
  boundary: {kind: constant, value: 0.0}
grid: {n_cells: 16}
analysis: {metrics: [flatness]}
"""
    cfg = write_cfg(tmp_path, text)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 4
    d, _ = run_dir(capsys)
    man = json.loads((d / "manifest.json").read_text())
    assert man["exit_code"] == 4 and any(f.startswith("analysis_failed") for f in man["flags"])


def test_compare(capsys, tmp_path):
    cfg = write_cfg(tmp_path)
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "b")])
    fine = write_cfg(tmp_path, name="fine.yaml", grid__n_cells=128)
    main(["run", "--config", str(fine), "--out", str(tmp_path / "f")])
    capsys.readouterr()
    assert main(["compare", str(tmp_path / "a" / "manifest.json"), str(tmp_path / "b"),
                 "--out", str(tmp_path / "diff.json")]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["sup_diff"] == 0.0 and rep["l2_diff"] == 0.0
    assert all(v["delta"] == 0.0 for v in rep["metrics"].values())
    assert json.loads((tmp_path / "diff.json").read_text()) == rep
    # h versus h/2: restriction to the coarse nodes
    assert main(["compare", str(tmp_path / "a"), str(tmp_path / "f")]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert 0.0 < rep["sup_diff"] <= 5.0 / 32
    a = load_field(tmp_path / "a" / "field.dfb").values
    f = load_field(tmp_path / "f" / "field.dfb").values
    assert rep["sup_diff"] == pytest.approx(np.abs(f[::2] - a).max())


def test_compare_incompatible_exit_4(capsys, tmp_path):
    cfg = write_cfg(tmp_path)
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")])
    odd = write_cfg(tmp_path, name="odd.yaml", grid__n_cells=48)
    main(["run", "--config", str(odd), "--out", str(tmp_path / "b")])
    two = write_cfg(tmp_path, SMALL_1D.replace("dim: 1", "dim: 2").replace(
        "profile, a: 0.1234", "constant, value: 0.1"), name="two.yaml")
    main(["run", "--config", str(two), "--out", str(tmp_path / "c")])
    capsys.readouterr()
    assert main(["compare", str(tmp_path / "a"), str(tmp_path / "b")]) == 4
    assert "incompatible" in capsys.readouterr().err
    assert main(["compare", str(tmp_path / "a"), str(tmp_path / "c")]) == 4
    assert main(["compare", str(tmp_path / "a"), str(tmp_path / "missing")]) == 4
