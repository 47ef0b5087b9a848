"""Star-shaped gradient-constraint sets, their normals and gauges.

A set ``D`` is stored through its radial function ``f``: the boundary is
``{f(nu) nu : |nu| = 1}``. In two dimensions ``f`` is tabulated on ``M``
equally spaced angles and interpolated linearly (periodically); in one
dimension it is the pair ``(f(+1), f(-1))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MIN_SAMPLES = 16
DEFAULT_SAMPLES = 720
MAX_NORMAL_JUMP_DEG = 10.0
UNIT_TOL = 1e-12


class GeometryError(ValueError):
    """Invalid geometric input."""


class StarShapeError(GeometryError):
    """The radial table violates the star-shape bounds; ``worst_nu`` locates it."""

    def __init__(self, message: str, worst_nu: np.ndarray):
        super().__init__(message)
        self.worst_nu = np.asarray(worst_nu, dtype=float)


def unit(v) -> np.ndarray:
    """Normalise ``v`` to a unit vector."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0.0:
        raise GeometryError("cannot normalise a zero or non-finite vector")
    return v / n


def check_direction(nu, dim: int | None = None) -> np.ndarray:
    """Return ``nu`` as an array after checking it is a unit vector."""
    nu = np.asarray(nu, dtype=float).reshape(-1)
    if dim is not None and nu.shape[0] != dim:
        raise GeometryError(f"direction has {nu.shape[0]} components, expected {dim}")
    if abs(np.linalg.norm(nu) - 1.0) > UNIT_TOL:
        raise GeometryError(f"direction {nu.tolist()} is not a unit vector")
    return nu


@dataclass(frozen=True, eq=False)
class StarDomain:
    """Compact star-shaped set with ``delta <= f <= 1/delta``.

    Parameters
    ----------
    dim : 1 or 2.
    radial : tabulated radial function. In 2D ``radial[j] = f(theta_j)`` with
        ``theta_j = 2 pi j / M``; in 1D ``(f(+1), f(-1))``.
    delta : star-shape constant. ``None`` means "use the measured value".
    kind : ``'ball'`` marks an exact ball (the gauge is then exact),
        ``'table'`` anything else.
    """

    dim: int
    radial: np.ndarray
    delta: float | None = None
    kind: str = "table"

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GeometryError("only dimensions 1 and 2 are supported")
        r = np.array(self.radial, dtype=float).reshape(-1)
        if self.dim == 1 and r.shape[0] != 2:
            raise GeometryError("a 1D domain needs exactly (f(+1), f(-1))")
        if self.dim == 2 and r.shape[0] < MIN_SAMPLES:
            raise GeometryError(f"need at least {MIN_SAMPLES} angular samples, got {r.shape[0]}")
        if not np.all(np.isfinite(r)) or np.any(r <= 0.0):
            raise GeometryError("radial function must be finite and positive")
        r.flags.writeable = False
        object.__setattr__(self, "radial", r)
        if self.delta is None:
            object.__setattr__(self, "delta", self._measured_delta())
        elif not 0.0 < self.delta <= 1.0:
            raise GeometryError("delta must lie in (0, 1]")

    # -- constructors -------------------------------------------------------
    @classmethod
    def ball(cls, radius: float = 1.0, dim: int = 2, samples: int = DEFAULT_SAMPLES,
             delta: float | None = None) -> "StarDomain":
        radial = np.full(2 if dim == 1 else samples, float(radius))
        return cls(dim, radial, delta, kind="ball")

    @classmethod
    def from_function(cls, f, samples: int = DEFAULT_SAMPLES,
                      delta: float | None = None) -> "StarDomain":
        """Tabulate ``f(theta)`` on ``samples`` equally spaced angles."""
        theta = 2.0 * np.pi * np.arange(samples) / samples
        return cls(2, np.array([f(t) for t in theta], dtype=float), delta)

    @classmethod
    def ellipse(cls, a: float, b: float, samples: int = DEFAULT_SAMPLES,
                delta: float | None = None) -> "StarDomain":
        """Ellipse ``p1^2/a^2 + p2^2/b^2 <= 1``."""
        return cls.from_function(
            lambda t: 1.0 / math.sqrt((math.cos(t) / a) ** 2 + (math.sin(t) / b) ** 2),
            samples, delta)

    @classmethod
    def interval(cls, f_plus: float, f_minus: float, delta: float | None = None):
        """The 1D set ``[-f_minus, f_plus]``."""
        return cls(1, np.array([f_plus, f_minus], dtype=float), delta)

    # -- basic queries ------------------------------------------------------
    @property
    def samples(self) -> int:
        return self.radial.shape[0]

    @property
    def angles(self) -> np.ndarray:
        if self.dim == 1:
            return np.array([0.0, math.pi])
        return 2.0 * np.pi * np.arange(self.samples) / self.samples

    @property
    def f_min(self) -> float:
        return float(self.radial.min())

    @property
    def f_max(self) -> float:
        return float(self.radial.max())

    def directions(self) -> np.ndarray:
        """Sample directions, shape ``(M, dim)``."""
        if self.dim == 1:
            return np.array([[1.0], [-1.0]])
        t = self.angles
        return np.stack([np.cos(t), np.sin(t)], axis=1)

    def _slopes(self) -> np.ndarray:
        # centred estimate of df/dtheta at the table nodes
        r = self.radial
        dt = 2.0 * np.pi / self.samples
        return (np.roll(r, -1) - np.roll(r, 1)) / (2.0 * dt)

    def _interp(self, theta, table):
        m = self.samples
        t = np.mod(theta, 2.0 * np.pi) / (2.0 * np.pi / m)
        j = np.floor(t).astype(np.int64)
        frac = t - j
        j = j % m
        return table[j] * (1.0 - frac) + table[(j + 1) % m] * frac

    def f_of_nu(self, nu) -> np.ndarray | float:
        """Radial function at direction(s) ``nu`` (shape ``(..., dim)``)."""
        nu = np.asarray(nu, dtype=float)
        if self.dim == 1:
            out = np.where(nu[..., 0] >= 0.0, self.radial[0], self.radial[1])
        else:
            out = self._interp(np.arctan2(nu[..., 1], nu[..., 0]), self.radial)
        return float(out) if np.ndim(out) == 0 else out

    def normal_at(self, nu) -> np.ndarray:
        """Outer unit normal of ``partial D`` at the point ``f(nu) nu``."""
        nu = np.asarray(nu, dtype=float)
        if self.dim == 1:
            return np.sign(nu) + (nu == 0.0)
        theta = np.arctan2(nu[..., 1], nu[..., 0])
        f = self._interp(theta, self.radial)
        fp = self._interp(theta, self._slopes())
        c, s = np.cos(theta), np.sin(theta)
        # outward normal of theta -> f(theta)(c, s) is f nu - f' nu_perp
        n = np.stack([f * c + fp * s, f * s - fp * c], axis=-1)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    def contains(self, p, tol: float = 0.0) -> np.ndarray | bool:
        """``|p| <= f(p/|p|) + tol``."""
        p = np.asarray(p, dtype=float)
        r = np.linalg.norm(p, axis=-1)
        nu = p / np.where(r > 0, r, 1.0)[..., None]
        nu[..., 0] = np.where(r > 0, nu[..., 0], 1.0)
        out = r <= self.f_of_nu(nu) + tol
        return bool(out) if np.ndim(out) == 0 else out

    def boundary_points(self) -> np.ndarray:
        """``f(nu_j) nu_j`` at the table directions."""
        return self.radial[:, None] * self.directions()

    def is_convex(self, tol: float = 1e-12) -> bool:
        if self.dim == 1:
            return True
        pts = self.boundary_points()
        e = np.roll(pts, -1, axis=0) - pts
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        return bool(np.all(cross >= -tol))

    def omega_dot_nu(self) -> np.ndarray:
        if self.dim == 1:
            return np.ones(2)
        nu = self.directions()
        return np.sum(self.normal_at(nu) * nu, axis=1)

    def _measured_delta(self) -> float:
        return float(min(self.f_min, 1.0 / self.f_max, self.omega_dot_nu().min()))

    def validate(self) -> "StarShapeReport":
        return validate_star_shape(self)


@dataclass(frozen=True)
class StarShapeReport:
    delta_measured: float
    worst_nu: np.ndarray
    min_f: float
    max_f: float
    min_omega_dot_nu: float
    max_normal_jump_deg: float


def validate_star_shape(dom: StarDomain) -> StarShapeReport:
    """Check ``f >= delta``, ``f <= 1/delta`` and ``omega . nu >= delta``.

    Raises :class:`StarShapeError` naming the worst direction on failure and
    :class:`GeometryError` if the table is too coarse to resolve the normal.
    """
    nu = dom.directions()
    od = dom.omega_dot_nu()
    scores = np.minimum(np.minimum(dom.radial, 1.0 / dom.radial), od)
    k = int(np.argmin(scores))
    jump = 0.0
    if dom.dim == 2:
        n = dom.normal_at(nu)
        cosang = np.clip(np.sum(n * np.roll(n, -1, axis=0), axis=1), -1.0, 1.0)
        jump = float(np.degrees(np.arccos(cosang)).max())
    report = StarShapeReport(float(scores[k]), nu[k].copy(), dom.f_min, dom.f_max,
                             float(od.min()), jump)
    tol = 1e-12
    if report.delta_measured < dom.delta - tol:
        what = ("omega.nu" if od[k] == scores[k] else "f" if dom.radial[k] == scores[k]
                else "1/f")
        raise StarShapeError(
            f"star-shape bound violated: {what} = {scores[k]:.6g} < delta = {dom.delta:.6g} "
            f"at nu = {np.round(nu[k], 6).tolist()}", nu[k])
    if jump >= MAX_NORMAL_JUMP_DEG:
        raise GeometryError(
            f"angular table too coarse: adjacent normals differ by {jump:.2f} degrees")
    return report


def _check_directions(nu, dim: int) -> np.ndarray:
    nu = np.asarray(nu, dtype=float)
    if nu.shape[-1:] != (dim,):
        raise GeometryError(f"directions need {dim} components, got shape {nu.shape}")
    bad = np.abs(np.linalg.norm(nu, axis=-1) - 1.0) > UNIT_TOL
    if np.any(bad):
        raise GeometryError(f"direction {nu[bad][0].tolist()} is not a unit vector")
    return nu


def f_of_nu(dom: StarDomain, nu):
    """Radial function at unit direction(s) ``nu``; non-unit input is rejected."""
    return dom.f_of_nu(_check_directions(nu, dom.dim))


def normal_at(dom: StarDomain, nu):
    """Outer unit normal at ``f(nu) nu``; non-unit input is rejected."""
    return dom.normal_at(_check_directions(nu, dom.dim))


# ----------------------------------------------------------------------------
# gauge
# ----------------------------------------------------------------------------

def _segment_distance(p, a, b):
    ab = b - a
    L2 = np.sum(ab * ab, axis=-1)
    t = np.clip(np.sum((p[:, None, :] - a[None]) * ab[None], axis=-1) / L2[None], 0.0, 1.0)
    q = a[None] + t[..., None] * ab[None]
    return np.sqrt(np.sum((p[:, None, :] - q) ** 2, axis=-1))


@dataclass(frozen=True, eq=False)
class Gauge:
    """Convex penalty ``eta >= 0`` vanishing exactly on ``D`` (or its hull).

    ``mode='hull'`` measures the Euclidean distance to the convex hull of
    the sampled boundary; ``mode='radial'`` uses the radial excess
    ``max(0, |p| - f(p/|p|))``. Balls and intervals are handled exactly in
    either mode. ``smoothing > 0`` replaces the distance ``d`` by its Huber
    regularisation. ``scale`` is the proportionality constant relating the
    gauge to the distance.
    """

    domain: StarDomain
    mode: str = "hull"
    smoothing: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.mode not in ("hull", "radial"):
            raise GeometryError(f"unknown gauge mode {self.mode!r}")
        if self.smoothing < 0 or self.scale <= 0:
            raise GeometryError("smoothing must be >= 0 and scale > 0")
        if self.domain.dim == 2 and self.mode == "hull" and self.domain.kind != "ball":
            from scipy.spatial import ConvexHull

            pts = self.domain.boundary_points()
            hull = pts[ConvexHull(pts).vertices]  # counter-clockwise
            object.__setattr__(self, "_hull", hull)

    @property
    def convexified(self) -> bool:
        """True when the gauge measures distance to a strictly larger hull."""
        return self.mode == "hull" and not self.domain.is_convex()

    def distance(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        dom = self.domain
        flat = p.reshape(-1, dom.dim)
        if dom.dim == 1:
            x = flat[:, 0]
            d = np.maximum(0.0, np.maximum(x - dom.radial[0], -dom.radial[1] - x))
        elif dom.kind == "ball":
            d = np.maximum(0.0, np.linalg.norm(flat, axis=1) - dom.radial[0])
        elif self.mode == "radial":
            r = np.linalg.norm(flat, axis=1)
            theta = np.arctan2(flat[:, 1], flat[:, 0])
            d = np.maximum(0.0, r - dom._interp(theta, dom.radial))
        else:
            d = self._hull_distance(flat)
        return d.reshape(p.shape[:-1])

    def _hull_distance(self, flat):
        hull = self._hull
        a, b = hull, np.roll(hull, -1, axis=0)
        e = b - a
        out = np.zeros(flat.shape[0])
        step = max(1, 2_000_000 // hull.shape[0])
        for s in range(0, flat.shape[0], step):
            p = flat[s:s + step]
            rel = p[:, None, :] - a[None]
            cross = e[None, :, 0] * rel[..., 1] - e[None, :, 1] * rel[..., 0]
            outside = np.any(cross < 0.0, axis=1)
            if np.any(outside):
                q = p[outside]
                out[s:s + step][outside] = _segment_distance(q, a, b).min(axis=1)
        return out

    def __call__(self, p) -> np.ndarray:
        d = self.distance(p)
        s = self.smoothing
        if s > 0.0:
            d = np.where(d < s, d * d / (2.0 * s), d - 0.5 * s)
        return self.scale * d


def gauge_eta(g: Gauge, p):
    return g(p)


# ----------------------------------------------------------------------------
# text tables
# ----------------------------------------------------------------------------

def _parse_rows(lines, ncols, what):
    rows = []
    for lineno, raw in lines:
        parts = raw.split()
        if len(parts) != ncols:
            raise GeometryError(f"{what} line {lineno}: expected {ncols} columns")
        try:
            rows.append([float(x) for x in parts])
        except ValueError as exc:
            raise GeometryError(f"{what} line {lineno}: {exc}") from None
    return np.array(rows, dtype=float).reshape(-1, ncols)


def _split_sections(text):
    sections = {"radial": [], "profile": []}
    current = "radial"
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        marker = raw.strip().lower()
        if marker.startswith("# profile") or marker == "[profile]":
            current = "profile"
            continue
        if line:
            sections[current].append((lineno, line))
    return sections


def _radial_from_rows(rows, samples):
    if rows.shape[0] < MIN_SAMPLES:
        raise GeometryError(f"need at least {MIN_SAMPLES} rows, got {rows.shape[0]}")
    ang, f = rows[:, 0], rows[:, 1]
    if not np.all(np.isfinite(rows)):
        raise GeometryError("table contains non-finite values")
    if np.any(ang < 0.0) or np.any(ang >= 2.0 * np.pi):
        raise GeometryError("angles must lie in [0, 2 pi)")
    if np.any(np.diff(ang) <= 0.0):
        k = int(np.argmax(np.diff(ang) <= 0.0))
        raise GeometryError(f"angles must be strictly increasing (row {k + 2})")
    if np.any(f <= 0.0):
        raise GeometryError("radial values must be positive")
    m = samples or rows.shape[0]
    theta = 2.0 * np.pi * np.arange(m) / m
    return np.interp(theta, ang, f, period=2.0 * np.pi)


def read_star_table(path, samples: int | None = None, delta: float | None = None) -> StarDomain:
    """Read a two-column ``angle f`` table (radians) into a :class:`StarDomain`.

    Non-uniform angles are resampled onto ``samples`` (default: row count)
    equally spaced angles by periodic linear interpolation.
    """
    sections = _split_sections(Path(path).read_text())
    rows = _parse_rows(sections["radial"], 2, "star table")
    dom = StarDomain(2, _radial_from_rows(rows, samples), delta)
    validate_star_shape(dom)
    return dom


def write_star_table(dom: StarDomain, path, profile=None) -> None:
    """Write ``angle f`` rows; ``profile=(d, g)`` appends a profile section."""
    if dom.dim != 2:
        raise GeometryError("text tables describe 2D domains")
    lines = ["# angle f"]
    lines += [f"{a:.17g} {f:.17g}" for a, f in zip(dom.angles, dom.radial)]
    if profile is not None:
        lines.append("# profile d g")
        lines += [f"{d:.17g} {g:.17g}" for d, g in zip(*profile)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_profile_table(path) -> tuple[np.ndarray, np.ndarray] | None:
    """Return the ``(d, g)`` profile section of a table file, if present."""
    sections = _split_sections(Path(path).read_text())
    if not sections["profile"]:
        return None
    rows = _parse_rows(sections["profile"], 2, "profile table")
    if np.any(np.diff(rows[:, 0]) <= 0.0):
        raise GeometryError("profile abscissae must be strictly increasing")
    return rows[:, 0], rows[:, 1]
