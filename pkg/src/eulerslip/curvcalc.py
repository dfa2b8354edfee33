"""Curl and divergence by two routes.

* exact: dual-number derivatives of closed-form Cartesian fields;
* curvilinear: second-order central differences of frame components on a
  ``(xi1, xi2, xi3)`` stencil built from parallel-surface frames, using the
  orthogonal-coordinate formulas with ``h3 = 1``.

The exact route is the verifier; the stencil route reproduces the
coordinate formulas as written.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import dual
from .geometry import BoundaryFrame, ChartDomainError, SurfaceChart, parallel_point, surface_frame

# stencil point order: centre, then +/- along xi1, xi2, xi3
STENCIL = ((0, 0, 0), (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))


def _as_points(points) -> tuple[np.ndarray, bool]:
    p = np.asarray(points, dtype=float)
    if p.shape == (3,):
        return p[None, :], True
    if p.ndim != 2 or p.shape[1] != 3:
        raise ValueError(f"points must have shape (N, 3), got {p.shape}")
    return p, False


@dataclass(frozen=True)
class AnalyticField:
    """Closed-form vector field ``(x, y, z) -> (fx, fy, fz)``.

    ``func`` must be written with the arithmetic of :mod:`eulerslip.dual`
    (plain operators plus ``dual.sin`` etc.) so that it accepts dual inputs.
    """

    func: Callable
    tag: str = ""

    def components(self, x, y, z):
        fx, fy, fz = self.func(x, y, z)
        return fx, fy, fz

    def __call__(self, points) -> np.ndarray:
        p, single = _as_points(points)
        out = self.components(p[:, 0], p[:, 1], p[:, 2])
        v = np.stack([np.broadcast_to(c, p.shape[:1]) for c in out], axis=-1).astype(float)
        return v[0] if single else v

    def jacobian(self, points) -> np.ndarray:
        """``J[..., i, j] = d f_i / d x_j``."""
        p, single = _as_points(points)
        _, g = dual.jet1(self.components, (p[:, 0], p[:, 1], p[:, 2]))
        J = np.stack([np.stack(row, axis=-1) for row in g], axis=-2)
        return J[0] if single else J

    def hessian(self, points) -> np.ndarray:
        """``H[..., i, j, k] = d^2 f_i / d x_j d x_k``."""
        p, single = _as_points(points)
        _, _, h = dual.jet2(self.components, (p[:, 0], p[:, 1], p[:, 2]))
        H = np.stack([np.stack([np.stack(r, axis=-1) for r in rows], axis=-2) for rows in h], axis=-3)
        return H[0] if single else H

    def scaled(self, c: float) -> "AnalyticField":
        f = self.func
        return AnalyticField(lambda x, y, z: tuple(c * q for q in f(x, y, z)), f"{c:g}*({self.tag})")


def curl_components(f: AnalyticField, x, y, z):
    """Curl of ``f`` at (possibly dual) coordinates, via a fresh seeding level."""
    s = dual.seed([x, y, z])
    out = f.components(*s)
    d = [dual.split(c, s[0].tag, 3)[1] for c in out]
    return (d[2][1] - d[1][2], d[0][2] - d[2][0], d[1][0] - d[0][1])


def div_components(f: AnalyticField, x, y, z):
    s = dual.seed([x, y, z])
    out = f.components(*s)
    d = [dual.split(c, s[0].tag, 3)[1] for c in out]
    return d[0][0] + d[1][1] + d[2][2]


def curl_field(f: AnalyticField) -> AnalyticField:
    """``curl f`` as a new field that can itself be differentiated."""
    return AnalyticField(lambda x, y, z: curl_components(f, x, y, z), f"curl({f.tag})")


def cross_field(a: AnalyticField, b: AnalyticField) -> AnalyticField:
    return AnalyticField(lambda x, y, z: dual.vcross(a.components(x, y, z), b.components(x, y, z)), f"({a.tag})x({b.tag})")


def gradient_field(phi: Callable, tag: str = "") -> AnalyticField:
    """``grad phi`` for a scalar closed form ``phi(x, y, z)``."""

    def func(x, y, z):
        s = dual.seed([x, y, z])
        _, d = dual.split(phi(*s), s[0].tag, 3)
        return tuple(d)

    return AnalyticField(func, tag or "grad(phi)")


def curl_exact(f: AnalyticField, x) -> np.ndarray:
    J = f.jacobian(x)
    return np.stack([J[..., 2, 1] - J[..., 1, 2], J[..., 0, 2] - J[..., 2, 0], J[..., 1, 0] - J[..., 0, 1]], axis=-1)


def div_exact(f: AnalyticField, x) -> np.ndarray:
    J = f.jacobian(x)
    return J[..., 0, 0] + J[..., 1, 1] + J[..., 2, 2]


# ---------------------------------------------------------------------------
# frame components


@dataclass(frozen=True)
class FrameComponents:
    """Components of a vector along ``(i1, i2, n)``."""

    v1: np.ndarray
    v2: np.ndarray
    v3: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(self.v1, self.v2, self.v3), axis=-1)

    def vector(self, frame: BoundaryFrame) -> np.ndarray:
        v1, v2, v3 = (np.asarray(c)[..., None] for c in (self.v1, self.v2, self.v3))
        return v1 * frame.i1 + v2 * frame.i2 + v3 * frame.n


def to_frame(v, frame: BoundaryFrame) -> FrameComponents:
    v = np.asarray(v, dtype=float)
    return FrameComponents(
        np.sum(v * frame.i1, axis=-1), np.sum(v * frame.i2, axis=-1), np.sum(v * frame.n, axis=-1)
    )


def tangential_cross(w, frame: BoundaryFrame) -> FrameComponents:
    """``w x n`` in frame components: ``(w2, -w1, 0)``."""
    c = to_frame(w, frame)
    return FrameComponents(c.v2, -c.v1, np.zeros_like(c.v1))


# ---------------------------------------------------------------------------
# curvilinear stencil route


def _d(g: np.ndarray, axis: int, steps) -> np.ndarray:
    return (g[1 + 2 * axis] - g[2 + 2 * axis]) / (2.0 * steps[axis])


def curl_curvilinear(values: np.ndarray, scales: np.ndarray, steps) -> FrameComponents:
    """Curl from frame components on the 7-point stencil.

    ``values[p, j]`` is the ``j``-th frame component at stencil point ``p``
    (order :data:`STENCIL`), ``scales[p, j]`` the scale factor ``h_{j+1}``
    there, ``steps`` the parameter increments along each ``xi``.
    """
    v = np.asarray(values, dtype=float)
    h = np.asarray(scales, dtype=float)
    hv = h * v
    h1, h2, h3 = h[0, 0], h[0, 1], h[0, 2]
    c1 = (_d(hv[:, 2], 1, steps) - _d(hv[:, 1], 2, steps)) / (h2 * h3)
    c2 = (_d(hv[:, 0], 2, steps) - _d(hv[:, 2], 0, steps)) / (h3 * h1)
    c3 = (_d(hv[:, 1], 0, steps) - _d(hv[:, 0], 1, steps)) / (h1 * h2)
    return FrameComponents(c1, c2, c3)


def div_curvilinear(values: np.ndarray, scales: np.ndarray, steps) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    h = np.asarray(scales, dtype=float)
    h1, h2, h3 = h[:, 0], h[:, 1], h[:, 2]
    total = (
        _d(h2 * h3 * v[:, 0], 0, steps)
        + _d(h3 * h1 * v[:, 1], 1, steps)
        + _d(h1 * h2 * v[:, 2], 2, steps)
    )
    return total / (h1[0] * h2[0] * h3[0])


def sample_stencil(chart: SurfaceChart, vector_fn, xi1, xi2, xi3, step: float | None = None):
    """Frame components and scale factors of ``vector_fn`` on the 7-point stencil.

    ``step`` is a physical length (default ``1e-4 * diameter``); parameter
    increments are ``step / h_j`` at the centre.  Frames off the boundary
    are the parallel-surface frames of the boundary point below.

    Returns ``(values, scales, steps)`` ready for :func:`curl_curvilinear`.
    """
    xi1, xi2, xi3 = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (xi1, xi2, xi3))
    xi1, xi2, xi3 = np.broadcast_arrays(xi1, xi2, xi3)
    step = 1e-4 * chart.diameter if step is None else float(step)
    _, h1c, h2c = parallel_point(chart, xi1, xi2, xi3)
    steps = (step / h1c, step / h2c, np.full_like(h1c, step))
    for axis, (lo, hi) in enumerate((chart.xi1_range, chart.xi2_range)):
        if chart.periodic[axis]:
            continue
        xi = (xi1, xi2)[axis]
        if np.any(xi - steps[axis] < lo) or np.any(xi + steps[axis] > hi):
            raise ChartDomainError(f"{chart.kind}: stencil leaves the coordinate patch along xi{axis + 1}")
    values, scales = [], []
    for o1, o2, o3 in STENCIL:
        u = xi1 + o1 * steps[0]
        w = xi2 + o2 * steps[1]
        s = xi3 + o3 * steps[2]
        pos, h1, h2 = parallel_point(chart, u, w, s)
        fr = surface_frame(chart, u, w)
        comps = to_frame(vector_fn(pos), fr)
        values.append([comps.v1, comps.v2, comps.v3])
        scales.append([h1, h2, np.ones_like(h1)])
    return np.array(values), np.array(scales), steps


def curl_on_chart(chart, vector_fn, xi1, xi2, xi3, step=None) -> FrameComponents:
    values, scales, steps = sample_stencil(chart, vector_fn, xi1, xi2, xi3, step)
    return curl_curvilinear(values, scales, steps)


def div_on_chart(chart, vector_fn, xi1, xi2, xi3, step=None) -> np.ndarray:
    values, scales, steps = sample_stencil(chart, vector_fn, xi1, xi2, xi3, step)
    return div_curvilinear(values, scales, steps)


def observed_order(steps, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(step)``."""
    slope, _ = np.polyfit(np.log(np.asarray(steps, float)), np.log(np.asarray(errors, float)), 1)
    return float(slope)
