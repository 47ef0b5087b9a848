"""Experiment configuration: YAML loading, environment overrides and validation."""
from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import os
from importlib import resources
from pathlib import Path

import jsonschema
import yaml

from .solvers.common import SolverConfig

ENV_PREFIX = "DEGENFB_CFG__"
SCHEMES = ("obstacle", "alt_phillips", "degenerate", "perron", "linearized")
METRICS = ("fb", "profile_error", "flatness", "nondegeneracy", "growth",
           "gradient_constraint", "eta_integral", "hausdorff", "harnack",
           "improvement", "expansion", "exact_error")
FORMATS = ("field", "vtk", "points", "csv", "json")


class ConfigError(ValueError):
    """Invalid experiment configuration (exit code 2)."""


_vec = {"type": "array", "items": {"type": "number"}, "minItems": 1, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "required": ["name", "problem", "grid"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "description": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "problem": {
            "type": "object",
            "required": ["scheme"],
            "additionalProperties": False,
            "properties": {
                "scheme": {"enum": list(SCHEMES)},
                "gamma": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 2},
                "h": {
                    "type": "object",
                    "required": ["kind"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["quadratic", "ellipse", "table"]},
                        "a": {"type": "number", "exclusiveMinimum": 0},
                        "b": {"type": "number", "exclusiveMinimum": 0},
                        "file": {"type": "string"},
                    },
                },
                "boundary": {
                    "type": "object",
                    "required": ["kind"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["half_plane", "constant", "profile", "radial",
                                          "file", "quadratic", "quartic"]},
                        "nu": _vec,
                        "value": {"type": "number", "minimum": 0},
                        "slope": {"type": "number", "minimum": 0},
                        "radius": {"type": "number", "minimum": 0},
                        "a": {"type": "number"},
                        "file": {"type": "string"},
                    },
                },
                "s": {"type": "number", "exclusiveMinimum": -1},
                "delta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "grid": {
            "type": "object",
            "required": ["n_cells"],
            "additionalProperties": False,
            "properties": {
                "n_cells": {"type": "integer", "minimum": 8, "maximum": 65535},
                "extent": {"type": "number", "exclusiveMinimum": 0},
                "dim": {"enum": [1, 2]},
            },
        },
        "solver": {"type": "object"},
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "metrics": {"type": "array", "items": {"enum": list(METRICS)}, "uniqueItems": True},
                "center": _vec,
                "r0": {"type": "number", "exclusiveMinimum": 0},
                "radii": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                          "minItems": 1},
                "band": {"type": "number", "exclusiveMinimum": 0},
                "levels": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                           "minItems": 1},
                "region_radius": {"type": "number", "exclusiveMinimum": 0},
                "eps0": {"type": "number", "exclusiveMinimum": 0},
                "fit_points": {"type": "array", "items": {"type": "number"}},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "formats": {"type": "array", "items": {"enum": list(FORMATS)}, "uniqueItems": True},
                "allow_unconverged": {"type": "boolean"},
            },
        },
    },
}

DEFAULTS = {
    "seed": 0,
    "grid": {"extent": 1.0, "dim": 2},
    "solver": {},
    "analysis": {"metrics": ["fb"]},
    "output": {"formats": ["field", "vtk", "points", "csv", "json"], "allow_unconverged": False},
}

_MESSAGES = {
    ("problem", "gamma"): "gamma must lie in the open interval (0, 2)",
    ("problem", "s"): "s must exceed -1",
    ("grid", "n_cells"): "n_cells must be an integer in [8, 65535]",
}


def _path(err) -> tuple:
    return tuple(str(p) for p in err.absolute_path)


def _format(err) -> str:
    path = _path(err)
    where = ".".join(path) or "<root>"
    hint = _MESSAGES.get(path)
    if hint and err.validator in ("minimum", "maximum", "exclusiveMinimum", "exclusiveMaximum",
                                  "type"):
        return f"{where}: {hint}, got {err.instance!r}"
    return f"{where}: {err.message}"


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _numeric(value):
    """YAML 1.1 reads ``1e-9`` as a string; promote such strings to floats."""
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    return value


def env_overrides(environ=None) -> dict:
    """``DEGENFB_CFG__SECTION__KEY=value`` pairs as a nested dict (YAML-parsed values)."""
    environ = os.environ if environ is None else environ
    out: dict = {}
    for key in sorted(environ):
        if not key.startswith(ENV_PREFIX):
            continue
        parts = [p.lower() for p in key[len(ENV_PREFIX):].split("__") if p]
        if not parts:
            continue
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        try:
            value = yaml.safe_load(environ[key])
        except yaml.YAMLError as exc:
            raise ConfigError(f"environment override {key}: {exc}") from exc
        node[parts[-1]] = _numeric(value)
    return out


def bundled_names() -> list[str]:
    root = resources.files("degenfb") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def bundled_path(name: str) -> Path:
    p = resources.files("degenfb") / "configs" / f"{name}.yaml"
    if not p.is_file():
        raise ConfigError(f"no bundled config named {name!r}")
    return Path(str(p))


def resolve_path(ref: str) -> Path:
    """A file path, or the name of a bundled config."""
    p = Path(ref)
    if p.is_file():
        return p
    if ref in bundled_names():
        return bundled_path(ref)
    raise ConfigError(f"config {ref!r} is neither a file nor a bundled config")


def load_raw(ref: str) -> tuple[dict, Path]:
    path = resolve_path(ref)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data, path


def _semantic(cfg: dict, base: Path | None) -> None:
    prob = cfg["problem"]
    scheme = prob["scheme"]
    dim = cfg["grid"]["dim"]
    bnd = prob.get("boundary")
    if scheme in ("alt_phillips",) and "gamma" not in prob:
        raise ConfigError("problem.gamma: required for the alt_phillips scheme")
    if scheme in ("degenerate", "perron") and "h" not in prob:
        raise ConfigError("problem.h: required for the degenerate and perron schemes")
    if prob.get("h", {}).get("kind") == "quadratic" and "gamma" not in prob:
        raise ConfigError("problem.gamma: required for h.kind = quadratic")
    if prob.get("h", {}).get("kind") == "ellipse" and dim != 2:
        raise ConfigError("problem.h: the ellipse is two-dimensional")
    if scheme == "linearized":
        if dim != 2:
            raise ConfigError("grid.dim: the linearized solver is two-dimensional")
        if "s" not in prob:
            raise ConfigError("problem.s: required for the linearized scheme")
        delta = prob.get("delta", 0.1)
        if not -1.0 + delta <= prob["s"] <= 1.0 / delta:
            raise ConfigError(f"problem.s: must lie in [-1 + delta, 1/delta] = "
                              f"[{-1 + delta:.4g}, {1 / delta:.4g}], got {prob['s']}")
        if bnd is None or bnd["kind"] not in ("quadratic", "quartic", "constant"):
            raise ConfigError("problem.boundary.kind: linearized runs take quadratic, "
                              "quartic or constant data")
    elif bnd is None:
        raise ConfigError("problem.boundary: required")
    elif bnd["kind"] in ("quadratic", "quartic"):
        raise ConfigError(f"problem.boundary.kind: {bnd['kind']!r} is for linearized runs")
    if bnd and bnd["kind"] == "profile" and dim != 1:
        raise ConfigError("problem.boundary.kind: profile data is one-dimensional")
    if bnd and bnd["kind"] == "profile" and "gamma" not in prob:
        raise ConfigError("problem.gamma: required for profile data")
    if bnd and "nu" in bnd and len(bnd["nu"]) != dim:
        raise ConfigError(f"problem.boundary.nu: needs {dim} components")
    for key, ref in (("problem.h.file", prob.get("h", {}).get("file")),
                     ("problem.boundary.file", (bnd or {}).get("file"))):
        if ref is not None and not _ref_path(ref, base).is_file():
            raise ConfigError(f"{key}: file {ref!r} does not exist")
    if prob.get("h", {}).get("kind") == "table" and "file" not in prob["h"]:
        raise ConfigError("problem.h.file: required for h.kind = table")
    fields = {f.name for f in dataclasses.fields(SolverConfig)}
    for k in cfg["solver"]:
        if k not in fields or k == "scheme":
            raise ConfigError(f"solver.{k}: unknown solver option")
    try:
        SolverConfig(**_solver_kwargs(cfg))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"solver: {exc}") from exc


def _ref_path(ref: str, base: Path | None) -> Path:
    p = Path(ref)
    if not p.is_absolute() and base is not None:
        p = base.parent / p
    return p


def _solver_kwargs(cfg: dict) -> dict:
    scheme = cfg["problem"]["scheme"]
    kw = dict(cfg["solver"])
    kw["scheme"] = "degenerate" if scheme == "linearized" else scheme
    return kw


def validate(cfg: dict, base: Path | None = None) -> dict:
    """Schema plus semantic checks; returns the config with defaults filled in."""
    v = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(v.iter_errors(cfg), key=lambda e: (len(e.absolute_path), _path(e)))
    if errors:
        raise ConfigError("; ".join(_format(e) for e in errors))
    full = _merge(DEFAULTS, cfg)
    _semantic(full, base)
    return full


def load_config(ref: str, environ=None, seed: int | None = None) -> tuple[dict, Path]:
    """Load, apply environment overrides and ``seed``, validate."""
    raw, path = load_raw(ref)
    raw = _merge(raw, env_overrides(environ))
    if seed is not None:
        raw["seed"] = int(seed)
    return validate(raw, path), path


def config_hash(cfg: dict) -> str:
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def solver_config(cfg: dict) -> SolverConfig:
    return SolverConfig(**_solver_kwargs(cfg))


def ref_path(cfg_path: Path | None, ref: str) -> Path:
    return _ref_path(ref, cfg_path)
