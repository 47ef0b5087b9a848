"""Command line runner: ``degenfb run | compare | validate-config | list-bundled``.

Exit codes: 0 success, 2 invalid configuration or usage, 3 solver did not
converge (artifacts still written), 4 analysis precondition failure or
incompatible comparison.
"""
from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__, _backend
from .config import (ConfigError, bundled_names, bundled_path, config_hash, load_config,
                     ref_path, solver_config)
from .fb_analysis import (FlatnessPreconditionError, TrappingError, eta_integral,
                          extract_free_boundary, flatness_profile, gradient_constraint_check,
                          harnack_decay, hausdorff_estimate, improvement_of_flatness,
                          linear_growth_check, nondegeneracy_constant, write_report)
from .fields import Grid, GridError, ScalarField
from .geometry import Gauge, StarDomain, read_profile_table, read_star_table
from .io import export_vtk, load_field, save_field, sha256_file, write_json
from .linearized import LinearizedProblem, expansion_fit, solve_Ls
from .potentials import (HFunction, ellipse_h, exact_1d_profile, h_quadratic, h_radial_table,
                         u_to_w)
from .solvers import (BoundaryData, perron_envelope, solve_alt_phillips, solve_degenerate,
                      solve_obstacle)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_ANALYSIS = 0, 2, 3, 4
FIELD_FILE = "field.dfb"


class AnalysisError(ValueError):
    """An analysis precondition failed (exit code 4)."""


# ----------------------------------------------------------------------------
# building problems from configs
# ----------------------------------------------------------------------------

def build_grid(cfg: dict) -> Grid:
    g = cfg["grid"]
    return Grid.box(float(g["extent"]), int(g["n_cells"]), int(g["dim"]))


def build_h(cfg: dict, path: Path | None, dim: int) -> HFunction | None:
    prob = cfg["problem"]
    spec = prob.get("h")
    if spec is None:
        return None
    if spec["kind"] == "quadratic":
        return h_quadratic(float(prob["gamma"]), dim)
    if spec["kind"] == "ellipse":
        return ellipse_h(float(spec.get("a", 2.0)), float(spec.get("b", 1.0)))
    file = ref_path(path, spec["file"])
    dom = read_star_table(file)
    prof = read_profile_table(file)
    if prof is None:
        raise ConfigError(f"problem.h.file: {file} has no '# profile' section")
    return h_radial_table(dom, prof)


def build_boundary(cfg: dict, path: Path | None, dim: int, hfun: HFunction | None):
    prob = cfg["problem"]
    b = prob["boundary"]
    kind = b["kind"]
    center = (0.0, 0.0)
    if kind == "half_plane":
        dom = hfun.domain if hfun is not None else StarDomain.ball(1.0, dim=dim)
        nu = b.get("nu", [0.0] * (dim - 1) + [1.0])
        return BoundaryData.half_plane(dom, nu, center=center)
    if kind == "constant":
        return BoundaryData.constant(float(b["value"]), center=center)
    if kind == "radial":
        slope, r0 = float(b.get("slope", 1.0)), float(b.get("radius", 0.5))
        return BoundaryData.radial(lambda r: slope * np.maximum(r - r0, 0.0), center=center)
    if kind == "profile":
        prof = exact_1d_profile(float(prob["gamma"]), float(b.get("a", 0.0)))
        if prob["scheme"] in ("degenerate", "perron"):
            return BoundaryData(lambda x: prof.w(x[..., 0]), label="profile_w", center=center)
        return BoundaryData(lambda x: prof.u(x[..., 0]), label="profile_u", center=center)
    if kind == "file":
        return BoundaryData.from_field(load_field(ref_path(path, b["file"])), center=center)
    raise ConfigError(f"problem.boundary.kind: unsupported kind {kind!r}")


def linearized_data(cfg: dict):
    prob = cfg["problem"]
    s = float(prob["s"])
    b = prob["boundary"]
    if b["kind"] == "constant":
        c = float(b["value"])
        return lambda x: np.full(x.shape[:-1], c)
    if b["kind"] == "quadratic":
        A = 1.0 / (1.0 + s)
        return lambda x: -x[..., 0] ** 2 + A * x[..., 1] ** 2
    c, d = 6.0 / (1.0 + s), 3.0 / ((1.0 + s) * (3.0 + s))
    return lambda x: x[..., 0] ** 4 - c * x[..., 0] ** 2 * x[..., 1] ** 2 + d * x[..., 1] ** 4


def solve(cfg: dict, path: Path | None):
    """Run the configured solver; returns ``(field, report, context)``."""
    prob = cfg["problem"]
    scheme = prob["scheme"]
    scfg = solver_config(cfg)
    if scheme == "linearized":
        problem = LinearizedProblem.laplacian(float(prob["s"]), 2, float(prob.get("delta", 0.1)))
        data = linearized_data(cfg)
        phi, rep = solve_Ls(problem, data, n=int(cfg["grid"]["n_cells"]),
                            tol=float(cfg["solver"].get("tol_change", 1e-12)))
        return phi, rep, {"problem": problem, "data": data}
    grid = build_grid(cfg)
    hfun = build_h(cfg, path, grid.dim)
    bd = build_boundary(cfg, path, grid.dim, hfun)
    if scheme == "obstacle":
        u, rep = solve_obstacle(bd, grid, scfg)
    elif scheme == "alt_phillips":
        u, rep = solve_alt_phillips(bd, float(prob["gamma"]), grid, scfg)
    elif scheme == "degenerate":
        u, rep = solve_degenerate(bd, hfun, grid, scfg)
    else:
        u, rep = perron_envelope(bd, hfun, grid, scfg)
        for k in [k for k, v in rep.extra.items() if not np.isscalar(v)]:
            rep.extra.pop(k)
    return u, rep, {"hfun": hfun, "boundary": bd, "grid": grid}


# ----------------------------------------------------------------------------
# analyses
# ----------------------------------------------------------------------------

def _w_field(u: ScalarField, cfg: dict) -> ScalarField:
    """Field on which free boundary metrics act (``u^(1/beta)`` for the variational schemes)."""
    prob = cfg["problem"]
    if prob["scheme"] in ("obstacle", "alt_phillips"):
        gamma = 1.0 if prob["scheme"] == "obstacle" else float(prob["gamma"])
        return u_to_w(u, gamma)
    return u


def _analysis_domain(cfg: dict, ctx: dict, dim: int) -> StarDomain:
    hfun = ctx.get("hfun")
    if hfun is not None:
        return hfun.domain
    gamma = 1.0 if cfg["problem"]["scheme"] == "obstacle" else float(cfg["problem"].get("gamma", 1.0))
    return h_quadratic(gamma, dim).domain


def _nearest_fb_point(fb, center):
    if fb.empty:
        raise AnalysisError("free boundary is empty")
    d = np.linalg.norm(fb.points - center, axis=1)
    return fb.points[int(np.argmin(d))]


def run_analyses(u: ScalarField, cfg: dict, ctx: dict, out: Path) -> tuple[dict, list[Path]]:
    an = cfg["analysis"]
    metrics = list(an["metrics"])
    prob = cfg["problem"]
    formats = set(cfg["output"]["formats"])
    files: list[Path] = []
    summary: dict = {}

    def report(name, rows, summ):
        summary[name] = summ
        if {"csv", "json"} & formats:
            paths = write_report(name, rows if "csv" in formats else [], summ, out)
            if "json" not in formats:
                paths[-1].unlink()
                paths = paths[:-1]
            files.extend(paths)

    if prob["scheme"] == "linearized":
        phi = u
        if "exact_error" in metrics:
            err = float(np.abs(phi.values - ctx["data"](phi.grid.points())).max())
            report("exact_error", [], {"sup_error": err, "h": phi.grid.h})
        if "expansion" in metrics:
            pts = an.get("fit_points", [0.0, 0.1])
            fits = [expansion_fit(phi, float(prob["s"]), x0=float(x)) for x in pts]
            report("expansion", [f.row() for f in fits],
                   {"max_abs_c1": max(abs(f.c1_est) for f in fits),
                    "flagged": any(f.flagged for f in fits)})
        return summary, files

    grid = u.grid
    dim = grid.dim
    w = _w_field(u, cfg)
    dom = _analysis_domain(cfg, ctx, dim)
    fb = extract_free_boundary(w)
    center = np.asarray(an.get("center", [0.0] * dim), dtype=float)
    if "fb" in metrics:
        if "points" in formats:
            files.append(fb.write(out / "fb_points.txt"))
        summary["fb"] = {"n_points": len(fb), "thresh": fb.thresh}
    if "profile_error" in metrics:
        b = prob["boundary"]
        gamma = 1.0 if prob["scheme"] == "obstacle" else float(prob["gamma"])
        prof = exact_1d_profile(gamma, float(b.get("a", 0.0)))
        x = grid.points()[..., 0]
        exact = prof.w(x) if prob["scheme"] in ("degenerate", "perron") else prof.u(x)
        err = float(np.abs(u.values - exact).max())
        loc = float(np.min(np.abs(fb.points[:, 0] - prof.a))) if not fb.empty else float("nan")
        report("profile_error", [], {"sup_error": err, "sup_error_over_h": err / grid.h,
                                     "fb_location_error": loc,
                                     "fb_location_error_over_h": loc / grid.h})
    x0 = None
    if any(m in metrics for m in ("flatness", "nondegeneracy", "harnack", "improvement")):
        x0 = _nearest_fb_point(fb, center)
    if "flatness" in metrics:
        rep = flatness_profile(w, dom, x0, float(an.get("r0", 0.5)))
        report("flatness", rep.rows(), {"center": x0, "eps": rep.eps, "radii": rep.radii})
    if "nondegeneracy" in metrics:
        radii = an.get("radii", [0.25, 0.125, 0.0625])
        per = [nondegeneracy_constant(w, x0, [r]) for r in radii]
        report("nondegeneracy", [{"r": r, "kappa": k} for r, k in zip(radii, per)],
               {"kappa": min(per), "per_radius": per, "spread": max(per) / min(per) - 1.0
                if min(per) > 0 else float("inf")})
    if "growth" in metrics:
        report("growth", [], {"C_growth": linear_growth_check(w, fb)})
    if any(m in metrics for m in ("gradient_constraint", "eta_integral")):
        gauge = Gauge(dom)
        if "gradient_constraint" in metrics:
            gc = gradient_constraint_check(w, gauge, float(an.get("band", 0.1)), fb)
            report("gradient_constraint", [], {"sup_eta": gc.sup_eta, "xi_fit": gc.xi_fit,
                                               "n_nodes": gc.n_nodes, "band": gc.band})
        if "eta_integral" in metrics:
            ei = eta_integral(w, gauge)
            report("eta_integral", [], {"value": ei.value, "value_alt": ei.value_alt,
                                        "floors": list(ei.floors),
                                        "convexified": ei.convexified})
    if "hausdorff" in metrics:
        levels = an.get("levels")
        levels = None if levels is None else [k * grid.h for k in levels]
        hr = hausdorff_estimate(w, levels, center, float(an.get("region_radius", 0.5)), fb)
        report("hausdorff", hr.rows(), {"values": hr.values, "levels": hr.levels,
                                        "cover_counts": hr.cover_counts})
    if "harnack" in metrics:
        nu = flatness_profile(w, dom, x0, float(an.get("r0", 0.5)), float(an.get("r0", 0.5))).nus[0]
        hd = harnack_decay(w, dom, x0, nu, float(an.get("r0", 0.5)))
        report("harnack", hd.rows(), {"ratios": hd.ratios, "holder_exponent": hd.holder_exponent})
    if "improvement" in metrics:
        R = min(1.0, float(an.get("r0", 0.5)) * 2.0)
        ir = improvement_of_flatness(w, dom, x0, r=R / 4.0, R=R, eps0=float(an.get("eps0", 0.1)))
        report("improvement", [], {"before": ir.before, "after": ir.after,
                                   "a_vector": ir.a_vector, "a_dot_omega": ir.a_dot_omega})
    return summary, files


# ----------------------------------------------------------------------------
# run
# ----------------------------------------------------------------------------

def fresh_dir(base: Path) -> Path:
    """``base`` if it holds no manifest yet, else ``base-1``, ``base-2``, ..."""
    cand = base
    k = 0
    while (cand / "manifest.json").exists():
        k += 1
        cand = base.with_name(f"{base.name}-{k}")
    cand.mkdir(parents=True, exist_ok=True)
    return cand


def _versions() -> dict:
    import numba
    import scipy

    return {"degenfb": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "python": platform.python_version()}


def run(cfg: dict, cfg_path: Path | None, out: Path, threads: int | None = None) -> tuple[int, Path]:
    """Solve, analyse and write artifacts plus ``manifest.json``; returns ``(exit code, dir)``."""
    out = fresh_dir(out)
    nthreads = _backend.set_threads(threads)
    np.random.seed(int(cfg["seed"]) % 2 ** 32)
    formats = set(cfg["output"]["formats"])
    t0 = time.perf_counter()
    u, rep, ctx = solve(cfg, cfg_path)
    t_solve = time.perf_counter() - t0
    files: list[Path] = []
    (out / "config.yaml").write_text(yaml.safe_dump(cfg, sort_keys=True))
    files.append(out / "config.yaml")
    if "field" in formats:
        files.append(save_field(u, out / FIELD_FILE, {"scheme": cfg["problem"]["scheme"],
                                                      "name": cfg["name"]}))
        files.append(Path(str(out / FIELD_FILE) + ".meta"))
    if "vtk" in formats:
        files.append(export_vtk(u, out / "field.vtk", name="u"))
    files.append(rep.write(out / "solve_report.txt", timing=False))
    if rep.energy_trace:
        files.append(rep.write_energy_csv(out / "energy_trace.csv"))
    flags = list(rep.flags)
    code = EXIT_OK
    summary: dict = {}
    t1 = time.perf_counter()
    if not rep.converged and not cfg["output"]["allow_unconverged"]:
        code = EXIT_SOLVER
        flags.append("unconverged_no_analysis")
    else:
        if not rep.converged:
            flags.append("UNCONVERGED")
        try:
            summary, afiles = run_analyses(u, cfg, ctx, out)
            files.extend(afiles)
            if not rep.converged:
                code = EXIT_SOLVER
        except (AnalysisError, GridError, FlatnessPreconditionError, TrappingError) as exc:
            flags.append(f"analysis_failed: {exc}")
            code = EXIT_ANALYSIS
    if summary:
        files.append(write_json(dict(sorted(summary.items())), out / "metrics.json"))
    t_an = time.perf_counter() - t1
    manifest = {
        "name": cfg["name"],
        "config_hash": config_hash(cfg),
        "seed": cfg["seed"],
        "versions": _versions(),
        "backend": rep.backend,
        "threads": nthreads,
        "converged": rep.converged,
        "flags": flags,
        "exit_code": code,
        "grid": u.grid.to_dict(),
        "wall_times": {"solve": t_solve, "analysis": t_an},
        "files": {p.name: sha256_file(p) for p in sorted(set(files))},
    }
    write_json(manifest, out / "manifest.json")
    return code, out


# ----------------------------------------------------------------------------
# compare
# ----------------------------------------------------------------------------

def _run_dir(ref: str) -> Path:
    p = Path(ref)
    return p.parent if p.is_file() else p


def _restrict(fine: ScalarField, coarse: ScalarField) -> np.ndarray:
    gf, gc = fine.grid, coarse.grid
    ratio = gc.h / gf.h
    k = int(round(ratio))
    if gf.dim != gc.dim or abs(ratio - k) > 1e-9 or k < 1:
        raise AnalysisError("incompatible grids: spacings are not in an integer ratio")
    off = (np.asarray(gc.origin) - np.asarray(gf.origin)) / gf.h
    if np.any(np.abs(off - np.round(off)) > 1e-9) or np.any(off < -1e-9):
        raise AnalysisError("incompatible grids: coarse nodes are not fine nodes")
    off = np.round(off).astype(int)
    sl = tuple(slice(o, o + k * (n - 1) + 1, k) for o, n in zip(off, gc.shape))
    sub = fine.values[sl]
    if sub.shape != coarse.values.shape:
        raise AnalysisError("incompatible grids: coarse grid exceeds the fine grid")
    return sub


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, (int, float)) and not isinstance(v, bool):
            out[key] = float(v)
    return out


def compare(ref_a: str, ref_b: str) -> dict:
    da, db = _run_dir(ref_a), _run_dir(ref_b)
    fa, fb = load_field(da / FIELD_FILE), load_field(db / FIELD_FILE)
    coarse, fine = (fa, fb) if fa.grid.h >= fb.grid.h else (fb, fa)
    sub = _restrict(fine, coarse)
    diff = sub - coarse.values
    h = coarse.grid.h
    ma = json.loads((da / "metrics.json").read_text()) if (da / "metrics.json").exists() else {}
    mb = json.loads((db / "metrics.json").read_text()) if (db / "metrics.json").exists() else {}
    xa, xb = _flatten(ma), _flatten(mb)
    deltas = {k: {"a": xa[k], "b": xb[k], "delta": xb[k] - xa[k]}
              for k in sorted(set(xa) & set(xb))}
    return {"a": str(da), "b": str(db), "h_a": fa.grid.h, "h_b": fb.grid.h,
            "sup_diff": float(np.abs(diff).max()),
            "l2_diff": float(np.sqrt(np.sum(diff ** 2) * h ** coarse.grid.dim)),
            "metrics": deltas}


# ----------------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="degenfb", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="solve and analyse one configuration")
    r.add_argument("--config", required=True, help="YAML file or bundled config name")
    r.add_argument("--out", default=None, help="run directory (default runs/<name>)")
    r.add_argument("--threads", type=int, default=None)
    r.add_argument("--seed", type=int, default=None)
    c = sub.add_parser("compare", help="diff two runs (manifests or run directories)")
    c.add_argument("a")
    c.add_argument("b")
    c.add_argument("--out", default=None, help="write the diff report here (JSON)")
    v = sub.add_parser("validate-config", help="check a configuration without running it")
    v.add_argument("--config", required=True)
    v.add_argument("--seed", type=int, default=None)
    sub.add_parser("list-bundled", help="list the bundled configurations")
    return p


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.verb == "list-bundled":
            for name in bundled_names():
                desc = yaml.safe_load(bundled_path(name).read_text()).get("description", "")
                print(f"{name}\t{desc}")
            return EXIT_OK
        if args.verb == "validate-config":
            cfg, _ = load_config(args.config, seed=args.seed)
            print(f"ok: {cfg['name']} (hash {config_hash(cfg)[:12]})")
            return EXIT_OK
        if args.verb == "run":
            cfg, path = load_config(args.config, seed=args.seed)
            out = Path(args.out) if args.out else Path("runs") / cfg["name"]
            code, rundir = run(cfg, path, out, args.threads)
            print(f"{rundir}\texit={code}")
            return code
        rep = compare(args.a, args.b)
        text = json.dumps(rep, indent=2, sort_keys=True)
        if args.out:
            Path(args.out).write_text(text + "\n")
        print(text)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AnalysisError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
