"""Configuration, reports and boundary data shared by the solvers."""
from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .. import _backend
from ..fields import Grid, ScalarField
from ..geometry import StarDomain, check_direction


class SolverError(ValueError):
    """Invalid solver configuration or precondition."""


class SeedParameterError(SolverError):
    """Seed constants ``C``, ``alpha`` fail an admissibility inequality."""


class BarrierRegimeError(SolverError):
    """Barrier parameters outside their admissible regime."""


SCHEMES = ("obstacle", "alt_phillips", "degenerate", "perron")


@dataclass(frozen=True)
class SolverConfig:
    """Numeric knobs for all schemes.

    Lengths ``floor``, ``blend``, ``band`` and ``snap`` are in units of the
    grid spacing ``h``. ``omega=None`` selects the optimal SOR factor for the
    Laplacian on the grid. ``band`` is a lower bound: the degenerate scheme
    widens it to ``0.15/(2 - omega)`` cells on fine grids.
    """

    scheme: str = "degenerate"
    tol_residual: float = 1e-6
    tol_change: float = 1e-12
    tol_energy: float = 1e-14
    max_iters: int = 200_000
    theta: float = 0.7
    omega: float | None = None
    floor: float = 0.5
    blend: float = 0.5
    band: float = 3.0
    snap: float = 1e-6
    stable_sweeps: int = 10
    check_every: int = 10
    t_reg: float | None = None
    fb_moves: int = 50
    # Perron
    seed_C: float | None = None
    seed_alpha: float | None = None
    patch_cells: int = 16
    patch_max_sweeps: int = 20_000
    max_passes: int = 500
    seed_samples: int = 1024

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise SolverError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not self.tol_residual > 0:
            raise SolverError("tol_residual must be positive")
        if not 0.0 < self.theta <= 1.0:
            raise SolverError("theta must lie in (0, 1]")
        if self.floor < 0.5:
            raise SolverError("floor must be at least h/2 (floor >= 0.5 in units of h)")
        if self.omega is not None and not 0.0 < self.omega < 2.0:
            raise SolverError("omega must lie in (0, 2)")
        if self.max_iters < 1 or self.stable_sweeps < 1 or self.check_every < 1:
            raise SolverError("iteration counts must be positive")
        if self.patch_cells < 4:
            raise SolverError("patch_cells must be at least 4")

    def replace(self, **kw) -> "SolverConfig":
        d = asdict(self)
        d.update(kw)
        return SolverConfig(**d)


def optimal_omega(grid: Grid) -> float:
    """Optimal SOR factor for the Laplacian on the longest side of ``grid``."""
    n = max(grid.n_cells)
    return 2.0 / (1.0 + math.sin(math.pi / n))


@dataclass
class SolveReport:
    scheme: str
    backend: str = field(default_factory=_backend.backend_name)
    iterations: int = 0
    converged: bool = False
    residual_sup: float = float("nan")
    residual_l2: float = float("nan")
    change_last: float = float("nan")
    energy_trace: list = field(default_factory=list)
    energy_monotone: bool | None = None
    positivity_stable: bool | None = None
    wall_time: float = 0.0
    flags: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def summary(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("energy_trace", "extra")}
        d["flags"] = ",".join(self.flags) if self.flags else "none"
        d["energy_final"] = self.energy_trace[-1] if self.energy_trace else float("nan")
        for k, v in self.extra.items():
            if np.isscalar(v):
                d[k] = v
        return d

    def to_text(self, timing: bool = True) -> str:
        """``key = value`` lines; ``timing=False`` drops the wall time."""
        lines = []
        for k, v in self.summary().items():
            if k == "wall_time" and not timing:
                continue
            if isinstance(v, float):
                v = repr(v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    def write(self, path, timing: bool = True) -> Path:
        Path(path).write_text(self.to_text(timing))
        return Path(path)

    def write_energy_csv(self, path) -> Path:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["sweep", "energy"])
            for k, e in enumerate(self.energy_trace):
                wr.writerow([k, repr(float(e))])
        return Path(path)


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


# ----------------------------------------------------------------------------
# boundary data
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BoundaryData:
    """Dirichlet data ``phi`` given as a function of position.

    ``domain='ball'`` prescribes ``phi`` on nodes with ``|x - center| >= radius``
    (the remaining nodes are unknowns); ``domain='box'`` on the box edges.
    """

    func: Callable[[np.ndarray], np.ndarray]
    domain: str = "ball"
    radius: float = 1.0
    center: tuple = (0.0, 0.0)
    label: str = "custom"

    def __post_init__(self):
        if self.domain not in ("ball", "box"):
            raise SolverError(f"unknown boundary domain {self.domain!r}")

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def mask(self, grid: Grid) -> np.ndarray:
        if self.domain == "box":
            return grid.box_edge_mask()
        return grid.ball_mask(self.radius, np.asarray(self.center[:grid.dim]))

    def field(self, grid: Grid) -> ScalarField:
        """Field holding ``phi`` on Dirichlet nodes and 0 elsewhere."""
        mask = self.mask(grid)
        vals = np.where(mask, self(grid.points()), 0.0)
        if vals[mask].min(initial=0.0) < 0.0:
            raise SolverError("boundary data must be nonnegative")
        return ScalarField(grid, vals, mask)

    def samples(self, grid: Grid, m: int):
        """Boundary points, outer normals and data values used by the seeds."""
        dim = grid.dim
        c = np.asarray(self.center[:dim], dtype=float)
        if self.domain == "ball":
            if dim == 1:
                nu = np.array([[-1.0], [1.0]])
            else:
                t = 2.0 * np.pi * np.arange(m) / m
                nu = np.stack([np.cos(t), np.sin(t)], axis=1)
            pts = c + self.radius * nu
        else:
            lo, hi = np.asarray(grid.origin), np.asarray(grid.upper)
            if dim == 1:
                pts = np.array([[lo[0]], [hi[0]]])
                nu = np.array([[-1.0], [1.0]])
            else:
                k = max(2, m // 4)
                s = np.linspace(0.0, 1.0, k, endpoint=False)
                sides = []
                for a in range(2):
                    b = 1 - a
                    for end, sgn in ((lo[a], -1.0), (hi[a], 1.0)):
                        p = np.empty((k, 2))
                        p[:, a] = end
                        p[:, b] = lo[b] + s * (hi[b] - lo[b])
                        n = np.zeros((k, 2))
                        n[:, a] = sgn
                        sides.append((p, n))
                pts = np.concatenate([p for p, _ in sides])
                nu = np.concatenate([n for _, n in sides])
        return pts, nu, self(pts)

    # -- catalogue ----------------------------------------------------------
    @classmethod
    def constant(cls, c: float, **kw) -> "BoundaryData":
        return cls(lambda x: np.full(x.shape[:-1], float(c)), label=f"constant({c})", **kw)

    @classmethod
    def half_plane(cls, dom: StarDomain, nu, **kw) -> "BoundaryData":
        """Trace of the exact solution ``f(nu) (x . nu)^+``."""
        nu = check_direction(nu, dom.dim)
        slope = float(dom.f_of_nu(nu))
        return cls(lambda x: slope * np.maximum(x @ nu, 0.0),
                   label=f"half_plane({nu.tolist()})", **kw)

    @classmethod
    def radial(cls, profile: Callable, **kw) -> "BoundaryData":
        def func(x):
            c = np.asarray(kw.get("center", (0.0, 0.0))[:x.shape[-1]])
            return profile(np.linalg.norm(x - c, axis=-1))
        return cls(func, label="radial", **kw)

    @classmethod
    def from_field(cls, f: ScalarField, **kw) -> "BoundaryData":
        """Data interpolated from a stored field (points must lie in its grid)."""
        return cls(lambda x: f(x), label="field", **kw)


def resolve_data(data, grid: Grid | None) -> ScalarField:
    """Accept a :class:`ScalarField` or :class:`BoundaryData` plus a grid."""
    if isinstance(data, ScalarField):
        if grid is not None and grid != data.grid:
            raise SolverError("grid does not match the boundary-data field")
        data.require_nonnegative("boundary data")
        return data
    if isinstance(data, BoundaryData):
        if grid is None:
            raise SolverError("a grid is required with BoundaryData")
        return data.field(grid)
    raise SolverError("boundary data must be a ScalarField or BoundaryData")


def initial_guess(data: ScalarField) -> np.ndarray:
    """Constant supersolution ``max(data)`` on free nodes, data elsewhere."""
    v = data.array2d()
    fixed = data.mask2d()
    top = float(v[fixed].max()) if np.any(fixed) else 0.0
    return np.where(fixed, v, top)
