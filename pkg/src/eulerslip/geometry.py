"""Curvature-line charts on boundary surfaces and their parallel extensions.

Every chart maps parameters ``(xi1, xi2)`` to a boundary point such that the
coordinate lines are lines of curvature.  Adding the signed normal distance
``xi3`` (positive outside the domain) gives orthogonal coordinates with
``h3 = 1``.  Surfaces of revolution use ``xi1`` = meridian parameter and
``xi2`` = azimuth; the flat slab uses Cartesian ``(x, y)`` on the plane
``z = 0``.

Principal curvatures carry the sign convention ``kappa > 0`` where the
domain is convex (the unit ball has ``kappa1 = kappa2 = +1``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.stats import qmc

from . import dual
from .dual import vcross, vdot, vnorm
from .expr import compile_expression

DEGENERACY_TOL = 1e-14
FOCAL_TOL = 1e-12
POLE_BAND = 1e-3
UMBILIC_TOL = 1e-8


class GeometryError(ValueError):
    pass


class ChartDomainError(GeometryError):
    """Parameters outside the chart's parameter ranges."""


class SingularChartError(GeometryError):
    """The parametrization degenerates (e.g. at a pole)."""


class FocalPointError(GeometryError):
    """Parallel-surface coordinates cross a focal point."""


class PointClass(str, enum.Enum):
    GENERIC = "generic"
    UMBILICAL = "umbilical"
    PLANAR = "planar"


@dataclass(frozen=True)
class BoundaryFrame:
    """Orthonormal frame, scale factors and principal curvatures at boundary points.

    Array fields share a leading sample axis; vectors have a trailing axis of 3.
    """

    xi1: np.ndarray
    xi2: np.ndarray
    position: np.ndarray
    i1: np.ndarray
    i2: np.ndarray
    n: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray

    @property
    def gaussian(self) -> np.ndarray:
        return self.kappa1 * self.kappa2

    @property
    def mean(self) -> np.ndarray:
        return 0.5 * (self.kappa1 + self.kappa2)

    def __len__(self) -> int:
        return int(np.size(self.xi1))

    def take(self, idx) -> "BoundaryFrame":
        return BoundaryFrame(**{k: np.asarray(getattr(self, k))[idx] for k in self.__dataclass_fields__})


# ---------------------------------------------------------------------------
# charts


@dataclass(frozen=True, eq=False)
class SurfaceChart:
    """Base class: a curvature-line parametrization of one boundary component."""

    kind: str
    params: dict
    xi1_range: tuple[float, float]
    xi2_range: tuple[float, float]
    periodic: tuple[bool, bool]
    pole_band: float = POLE_BAND

    def embed(self, u, v):
        """Boundary point as a tuple ``(x, y, z)``; works on duals."""
        raise NotImplementedError

    @property
    def diameter(self) -> float:
        raise NotImplementedError

    @property
    def reach(self) -> float:
        """Largest normal distance for which parallel coordinates stay valid."""
        return self.focal_distance

    @cached_property
    def focal_distance(self) -> float:
        u = np.linspace(*self._sampling_range(0), 801)
        v = np.full_like(u, self.xi2_range[0])
        fr = surface_frame(self, u, v)
        kmax = float(np.max(np.abs(np.concatenate([fr.kappa1, fr.kappa2]))))
        return math.inf if kmax == 0.0 else 1.0 / kmax

    def _sampling_range(self, axis: int) -> tuple[float, float]:
        lo, hi = (self.xi1_range, self.xi2_range)[axis]
        if self.periodic[axis]:
            return lo, hi
        return lo + self.pole_band, hi - self.pole_band

    def wrap(self, xi1, xi2):
        xi1 = np.asarray(xi1, dtype=float)
        xi2 = np.asarray(xi2, dtype=float)
        for axis, xi in ((0, xi1), (1, xi2)):
            lo, hi = (self.xi1_range, self.xi2_range)[axis]
            if not self.periodic[axis]:
                tol = 1e-12 * max(1.0, abs(hi - lo))
                if np.any(xi < lo - tol) or np.any(xi > hi + tol):
                    raise ChartDomainError(
                        f"{self.kind}: xi{axis + 1} outside [{lo:.6g}, {hi:.6g}]"
                    )
        return xi1, xi2

    def sample(self, count: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Scrambled Halton points over the parameter ranges (pole bands excluded)."""
        if count < 1:
            raise ValueError("sample count must be >= 1")
        pts = qmc.Halton(d=2, scramble=True, seed=seed).random(count)
        (a0, a1), (b0, b1) = self._sampling_range(0), self._sampling_range(1)
        return a0 + (a1 - a0) * pts[:, 0], b0 + (b1 - b0) * pts[:, 1]

    def interior_sample(self, count: int, seed: int = 0) -> np.ndarray:
        """Points of the closed domain in a boundary layer of width ``reach / 2``."""
        rng = np.random.default_rng(seed)
        u, v = self.sample(count, seed)
        depth = -0.5 * min(self.reach, self.diameter) * rng.random(count)
        pos, _, _ = parallel_point(self, u, v, depth)
        return pos

    def describe(self) -> dict:
        return {"kind": self.kind, **self.params}


@dataclass(frozen=True, eq=False)
class Revolution(SurfaceChart):
    """Surface of revolution about the z axis from a meridian profile ``(r(t), z(t))``.

    ``xi1 = t`` runs along the meridian, ``xi2`` is the azimuth.  If the raw
    profile orientation would give an inward normal, the meridian parameter
    is reversed at construction.
    """

    profile: object = None
    flipped: bool = False

    def meridian(self, t):
        if self.flipped:
            lo, hi = self.xi1_range
            t = (lo + hi) - t
        r, z = self.profile(t)
        return r, z

    def embed(self, u, v):
        r, z = self.meridian(u)
        return r * dual.cos(v), r * dual.sin(v), z + 0.0 * u

    @cached_property
    def _profile_samples(self):
        t = np.linspace(*self.xi1_range, 4001)
        r, z = self.meridian(t)
        return np.broadcast_to(r, t.shape).astype(float), np.broadcast_to(z, t.shape).astype(float)

    @property
    def diameter(self) -> float:
        r, z = self._profile_samples
        return float(max(2.0 * np.max(np.abs(r)), np.ptp(z)))

    @property
    def closed_loop(self) -> bool:
        r, z = self._profile_samples
        return bool(self.periodic[0] and math.hypot(r[-1] - r[0], z[-1] - z[0]) < 1e-9 * self.diameter)


def _oriented_revolution(kind, params, profile, t_range, periodic, pole_band=POLE_BAND) -> Revolution:
    chart = Revolution(
        kind=kind,
        params=params,
        xi1_range=tuple(map(float, t_range)),
        xi2_range=(0.0, 2.0 * math.pi),
        periodic=(bool(periodic), True),
        pole_band=pole_band,
        profile=profile,
    )
    r, z = chart._profile_samples
    if np.any(r < -1e-12):
        raise GeometryError(f"{kind}: profile radius must be non-negative")
    if chart.closed_loop:
        pr, pz = r, z
    else:
        pr = np.concatenate([r, [0.0, 0.0]])
        pz = np.concatenate([z, [z[-1], z[0]]])
    area = 0.5 * np.sum(pr * np.roll(pz, -1) - np.roll(pr, -1) * pz)
    if area > 0.0:
        # counter-clockwise meridian: left normal points inward
        chart = Revolution(
            kind=kind,
            params=params,
            xi1_range=chart.xi1_range,
            xi2_range=chart.xi2_range,
            periodic=chart.periodic,
            pole_band=pole_band,
            profile=profile,
            flipped=True,
        )
    return chart


def sphere(R: float = 1.0) -> Revolution:
    _positive(R=R)
    return _oriented_revolution(
        "sphere", {"R": R}, lambda t: (R * dual.sin(t), R * dual.cos(t)), (0.0, math.pi), False
    )


def spheroid(a_eq: float, c_pol: float) -> Revolution:
    _positive(a_eq=a_eq, c_pol=c_pol)
    return _oriented_revolution(
        "spheroid",
        {"a_eq": a_eq, "c_pol": c_pol},
        lambda t: (a_eq * dual.sin(t), c_pol * dual.cos(t)),
        (0.0, math.pi),
        False,
    )


def torus(R_major: float, r_minor: float) -> Revolution:
    """Torus; ``xi1 = 0`` is the top circle, ``xi1 = pi/2`` the outer equator."""
    _positive(R_major=R_major, r_minor=r_minor)
    if r_minor >= R_major:
        raise GeometryError("torus needs r_minor < R_major")
    return _oriented_revolution(
        "torus",
        {"R_major": R_major, "r_minor": r_minor},
        lambda t: (R_major + r_minor * dual.sin(t), r_minor * dual.cos(t)),
        (0.0, 2.0 * math.pi),
        True,
    )


def cylinder(R: float, length: float) -> Revolution:
    """Cylinder of radius ``R``, periodic with period ``length`` along its axis."""
    _positive(R=R, length=length)
    return _oriented_revolution(
        "cylinder", {"R": R, "length": length}, lambda t: (R + 0.0 * t, -t), (0.0, length), True
    )


def revolution(r: str, z: str, t_range, periodic: bool = False) -> Revolution:
    """Surface of revolution from profile expressions in the variable ``t``."""
    fr = compile_expression(r, ("t",))
    fz = compile_expression(z, ("t",))

    def profile(t):
        return fr(t) + 0.0 * t, fz(t) + 0.0 * t

    return _oriented_revolution(
        "revolution", {"r": r, "z": z, "t_range": list(t_range), "periodic": periodic}, profile, t_range, periodic
    )


@dataclass(frozen=True, eq=False)
class Slab(SurfaceChart):
    """Flat boundary ``z = 0`` of the periodic slab ``(0, L)^2 x (-depth, 0)``."""

    def embed(self, u, v):
        return u + 0.0 * v, v + 0.0 * u, 0.0 * u

    @property
    def diameter(self) -> float:
        return self.params["length"]

    @property
    def reach(self) -> float:
        return self.params["depth"]

    @cached_property
    def focal_distance(self) -> float:
        return math.inf


def slab(length: float = 2.0 * math.pi, depth: float = 1.0) -> Slab:
    _positive(length=length, depth=depth)
    return Slab(
        kind="slab",
        params={"length": length, "depth": depth},
        xi1_range=(0.0, length),
        xi2_range=(0.0, length),
        periodic=(True, True),
    )


def _positive(**values):
    for name, value in values.items():
        if not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
            raise GeometryError(f"{name} must be a positive number, got {value!r}")


# ---------------------------------------------------------------------------
# frames and curvatures


def _squeeze(frame: BoundaryFrame, scalar: bool) -> BoundaryFrame:
    if not scalar:
        return frame
    return frame.take(0)


def surface_frame(chart: SurfaceChart, xi1, xi2) -> BoundaryFrame:
    """Frame, scale factors and principal curvatures from the second fundamental form."""
    scalar = np.ndim(xi1) == 0 and np.ndim(xi2) == 0
    u, v = chart.wrap(np.atleast_1d(xi1), np.atleast_1d(xi2))
    u, v = np.broadcast_arrays(u, v)
    X, dX, ddX = dual.jet2(chart.embed, (u, v))
    X = np.stack(X, axis=-1)
    Xu = np.stack([dX[i][0] for i in range(3)], axis=-1)
    Xv = np.stack([dX[i][1] for i in range(3)], axis=-1)
    Xuu = np.stack([ddX[i][0][0] for i in range(3)], axis=-1)
    Xvv = np.stack([ddX[i][1][1] for i in range(3)], axis=-1)
    h1 = np.linalg.norm(Xu, axis=-1)
    h2 = np.linalg.norm(Xv, axis=-1)
    if np.any(h1 < DEGENERACY_TOL) or np.any(h2 < DEGENERACY_TOL):
        raise SingularChartError(f"{chart.kind}: degenerate frame (|dx/dxi| < {DEGENERACY_TOL:g})")
    i1 = Xu / h1[:, None]
    i2 = Xv / h2[:, None]
    n = np.cross(i1, i2)
    kappa1 = -np.einsum("ij,ij->i", Xuu, n) / h1**2
    kappa2 = -np.einsum("ij,ij->i", Xvv, n) / h2**2
    frame = BoundaryFrame(u, v, X, i1, i2, n, h1, h2, kappa1, kappa2)
    return _squeeze(frame, scalar)


def _unit_normal(chart: SurfaceChart, u, v):
    """Unit outward normal as a function of (possibly dual) parameters."""
    s = dual.seed([u, v])
    X = chart.embed(*s)
    Xu, Xv = [], []
    for c in X:
        _, d = dual.split(c, s[0].tag, 2)
        Xu.append(d[0])
        Xv.append(d[1])
    m = vcross(Xu, Xv)
    size = vnorm(m)
    return tuple(c / size for c in m)


def _offset_embed(chart: SurfaceChart, u, v, s):
    X = chart.embed(u, v)
    nn = _unit_normal(chart, u, v)
    return tuple(x + s * c for x, c in zip(X, nn))


def _parallel_scales(chart: SurfaceChart, u, v, s):
    """``(h1(s), h2(s))`` as the lengths of the tangent vectors of the offset map."""
    p = dual.seed([u, v])
    Y = _offset_embed(chart, p[0], p[1], s)
    Yu, Yv = [], []
    for c in Y:
        _, d = dual.split(c, p[0].tag, 2)
        Yu.append(d[0])
        Yv.append(d[1])
    return vnorm(Yu), vnorm(Yv)


def parallel_point(chart: SurfaceChart, xi1, xi2, xi3):
    """Position and scale factors on the parallel surface at normal distance ``xi3``.

    Scale factors are measured from the offset parametrization directly,
    so ``h_j(xi3) = h_j(0) (1 + kappa_j xi3)`` is a checkable law, not an input.
    """
    scalar = all(np.ndim(a) == 0 for a in (xi1, xi2, xi3))
    frame = surface_frame(chart, np.atleast_1d(xi1), np.atleast_1d(xi2))
    s = np.broadcast_to(np.asarray(xi3, dtype=float), frame.h1.shape)
    for kappa in (frame.kappa1, frame.kappa2):
        if np.any(1.0 + kappa * s <= FOCAL_TOL):
            raise FocalPointError(f"{chart.kind}: normal distance crosses a focal point")
    position = frame.position + s[:, None] * frame.n
    h1, h2 = _parallel_scales(chart, frame.xi1, frame.xi2, s)
    h1 = np.broadcast_to(dual.real(h1), s.shape)
    h2 = np.broadcast_to(dual.real(h2), s.shape)
    if scalar:
        return position[0], float(h1[0]), float(h2[0])
    return position, np.array(h1), np.array(h2)


def curvatures_via_kapa(chart: SurfaceChart, xi1, xi2, delta: float | None = None):
    """Principal curvatures as ``(1/h_j) dh_j/dxi3`` at ``xi3 = 0``.

    The normal derivative of the offset scale factors is taken exactly
    (dual numbers in ``xi3``).  Uses the Weingarten map (derivatives of the
    normal), not second derivatives of the embedding, so it is an
    independent route to the values from :func:`surface_frame`.  ``delta``
    is only validated: it bounds the normal band the result is claimed for.
    """
    if delta is not None:
        limit = 0.1 * chart.focal_distance
        if not (0.0 < delta < limit):
            raise ChartDomainError(f"step {delta!r} outside (0, {limit:.6g})")
    scalar = np.ndim(xi1) == 0 and np.ndim(xi2) == 0
    u, v = chart.wrap(np.atleast_1d(xi1), np.atleast_1d(xi2))
    u, v = np.broadcast_arrays(u, v)
    (s,) = dual.seed([np.zeros(u.shape)])
    h1, h2 = _parallel_scales(chart, u, v, s)
    out = []
    for h in (h1, h2):
        base, (dh,) = dual.split(h, s.tag, 1)
        base = dual.real(base)
        if np.any(base < DEGENERACY_TOL):
            raise SingularChartError(f"{chart.kind}: degenerate frame")
        out.append(np.broadcast_to(dual.real(dh) / base, u.shape).astype(float))
    if scalar:
        return float(out[0][0]), float(out[1][0])
    return out[0], out[1]


def classify_point(frame: BoundaryFrame, tol: float = UMBILIC_TOL, scale: float = 1.0):
    """``generic`` / ``umbilical`` / ``planar`` per point; ``scale`` makes ``tol`` dimensionless."""
    k1 = np.asarray(frame.kappa1) * scale
    k2 = np.asarray(frame.kappa2) * scale
    umb = np.abs(k1 - k2) <= tol
    planar = umb & (np.maximum(np.abs(k1), np.abs(k2)) <= tol)
    out = np.where(planar, PointClass.PLANAR.value, np.where(umb, PointClass.UMBILICAL.value, PointClass.GENERIC.value))
    if out.ndim == 0:
        return PointClass(str(out))
    return out


def sigma_membership(frame: BoundaryFrame, tol: float = UMBILIC_TOL):
    """True where the Gaussian curvature does not vanish (``|k1 k2| > tol``)."""
    return np.abs(np.asarray(frame.kappa1) * np.asarray(frame.kappa2)) > tol
