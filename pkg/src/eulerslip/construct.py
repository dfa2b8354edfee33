"""Admissible fields from prescribed normal vorticity on surfaces of revolution.

Given a zero-mean axisymmetric boundary scalar ``beta``, the stream profile
``psi_b(t) = int_0^t beta r ds`` is extended into the domain as
``psi(x) = psi_b(t(x)) * chi(d(x) / w)`` where ``t(x)`` and ``d(x)`` are the
nearest-boundary meridian parameter and the signed normal distance, and
``chi(s) = (1 - s^2)^3`` for ``|s| <= 1`` (zero outside).  The field

    a = psi / r^2 * (-y, x, 0)

is azimuthal and axisymmetric, so ``div a = 0`` and ``a.n = 0``; since
``chi'(0) = 0`` the vorticity ``b = curl a`` is normal on the boundary with
``b.n = beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from . import dual
from .curvcalc import AnalyticField, curl_exact, curl_field, div_exact
from .expr import compile_expression
from .geometry import (
    FocalPointError,
    GeometryError,
    Revolution,
    Slab,
    SurfaceChart,
    sphere,
    surface_frame,
)

CERTIFICATE_TOL = 1e-8
CLOSURE_TOL = 1e-10
_PANELS = 64
_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(20)


class ConstructionError(ValueError):
    pass


class DegenerateBetaError(ConstructionError):
    """The boundary data vanishes identically after removing its mean."""


class ConstraintViolationError(ConstructionError):
    """The stream profile does not close (beta is not zero-mean)."""


class RegularityError(ConstructionError):
    """``psi / r`` would be unbounded on the symmetry axis."""


# ---------------------------------------------------------------------------
# boundary data


@dataclass(frozen=True)
class BetaSpec:
    """Axisymmetric boundary data as a function of the meridian parameter.

    basis:
      ``legendre``  sum c_k P_k(cos t)
      ``fourier``   c_0 + sum a_k cos(2 pi k t / L) + b_k sin(2 pi k t / L),
                    coefficients ordered ``[c_0, a_1, b_1, a_2, b_2, ...]``
      ``bump``      sum amplitude * exp(-1 / (1 - s^2)), s = (t - center) / width
      ``expr``      closed-form expression in ``t``
    """

    basis: str
    coefficients: tuple = ()
    bumps: tuple = ()  # (center, width, amplitude) triples
    expr: str | None = None

    def raw(self, chart: Revolution) -> Callable:
        lo, hi = chart.xi1_range
        period = hi - lo
        if self.basis == "legendre":
            coeffs = [float(c) for c in self.coefficients]

            def f(t):
                u = dual.cos(t)
                p_prev, p = 1.0 + 0.0 * t, u
                total = coeffs[0] * p_prev if coeffs else 0.0 * t
                for k, c in enumerate(coeffs[1:], start=1):
                    total = total + c * p
                    p_prev, p = p, ((2 * k + 1) * u * p - k * p_prev) / (k + 1)
                return total

            return f
        if self.basis == "fourier":
            coeffs = [float(c) for c in self.coefficients]

            def f(t):
                total = (coeffs[0] if coeffs else 0.0) + 0.0 * t
                for idx, c in enumerate(coeffs[1:]):
                    k = idx // 2 + 1
                    arg = (2.0 * math.pi * k / period) * (t - lo)
                    total = total + c * (dual.cos(arg) if idx % 2 == 0 else dual.sin(arg))
                return total

            return f
        if self.basis == "bump":
            bumps = [tuple(map(float, b)) for b in self.bumps]
            for _, width, _ in bumps:
                if width <= 0:
                    raise ConstructionError("bump width must be positive")

            def f(t):
                total = 0.0 * t
                for center, width, amp in bumps:
                    off = t - center
                    if chart.periodic[0]:
                        shift = period * np.round(dual.real(off) / period)
                        off = off - shift
                    s = off / width
                    inside = np.abs(dual.real(s)) < 1.0
                    s_safe = dual.where(inside, s, 0.0)
                    val = dual.exp(-1.0 / (1.0 - s_safe * s_safe))
                    total = total + amp * dual.where(inside, val, 0.0)
                return total

            return f
        if self.basis == "expr":
            if not self.expr:
                raise ConstructionError("expr basis needs an expression")
            g = compile_expression(self.expr, ("t",))
            return lambda t: g(t) + 0.0 * t
        raise ConstructionError(f"unknown beta basis {self.basis!r}")

    def to_dict(self) -> dict:
        out = {"basis": self.basis}
        if self.coefficients:
            out["coefficients"] = [float(c) for c in self.coefficients]
        if self.bumps:
            out["bumps"] = [list(map(float, b)) for b in self.bumps]
        if self.expr:
            out["expr"] = self.expr
        return out


def _require_revolution(chart: SurfaceChart) -> Revolution:
    if not isinstance(chart, Revolution):
        raise GeometryError(f"{chart.kind}: this construction needs a surface of revolution")
    if not chart.periodic[0]:
        r_lo, _ = chart.meridian(np.array(chart.xi1_range[0]))
        r_hi, _ = chart.meridian(np.array(chart.xi1_range[1]))
        if max(abs(float(r_lo)), abs(float(r_hi))) > 1e-9 * chart.diameter:
            raise GeometryError(f"{chart.kind}: a non-periodic profile must start and end on the axis")
    return chart


def _profile_derivs(chart: Revolution, t):
    """``(r, z, r', z', r'', z'')`` at ``t`` (which may be dual)."""
    (s1,) = dual.seed([t])
    (s2,) = dual.seed([s1])
    out = []
    firsts, seconds = [], []
    for c in chart.meridian(s2):
        base, (d1,) = dual.split(c, s2.tag, 1)
        val, _ = dual.split(base, s1.tag, 1)
        first, (second,) = dual.split(d1, s1.tag, 1)
        out.append(val)
        firsts.append(first)
        seconds.append(second)
    return out[0], out[1], firsts[0], firsts[1], seconds[0], seconds[1]


def area_weight(chart: Revolution, t):
    """``r(t) |P'(t)|``: the surface-area density per unit ``t`` (over ``2 pi``)."""
    r, _, dr, dz, _, _ = _profile_derivs(chart, t)
    return r * dual.sqrt(dr * dr + dz * dz)


class _MeridianIntegral:
    """``int_lo^t q(s) ds`` by composite Gauss-Legendre on fixed panels."""

    def __init__(self, chart: Revolution, integrand: Callable):
        self.lo, self.hi = chart.xi1_range
        self.q = integrand
        self.edges = np.linspace(self.lo, self.hi, _PANELS + 1)
        a, b = self.edges[:-1], self.edges[1:]
        nodes = 0.5 * (b - a)[:, None] * _NODES[None, :] + 0.5 * (a + b)[:, None]
        vals = np.broadcast_to(dual.real(integrand(nodes)), nodes.shape)
        panel = 0.5 * (b - a) * (vals @ _WEIGHTS)
        self.cumulative = np.concatenate([[0.0], np.cumsum(panel)])

    def __call__(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        p = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, _PANELS - 1)
        a = self.edges[p]
        half = 0.5 * (t - a)
        nodes = half[..., None] * _NODES + (0.5 * (t + a))[..., None]
        vals = np.broadcast_to(dual.real(self.q(nodes)), nodes.shape)
        return self.cumulative[p] + half * (vals @ _WEIGHTS)

    @property
    def total(self) -> float:
        return float(self.cumulative[-1])


@dataclass(frozen=True, eq=False)
class BetaFunction:
    """Zero-mean boundary data ``beta(t)`` on a surface of revolution."""

    chart: Revolution
    raw: Callable
    mean: float
    spec: object = None

    def __call__(self, t):
        return self.raw(t) - self.mean

    def on_boundary(self, xi1, xi2=None):
        t = np.asarray(xi1, dtype=float)
        return np.broadcast_to(dual.real(self(t)), t.shape).astype(float)

    @property
    def projection(self) -> float:
        return abs(self.mean)

    def describe(self) -> dict:
        spec = self.spec.to_dict() if isinstance(self.spec, BetaSpec) else self.spec
        return {"spec": spec, "projected_mean": self.mean}


def make_beta(spec: BetaSpec | Callable, chart: SurfaceChart) -> BetaFunction:
    """Boundary data with its area-weighted mean projected out."""
    chart = _require_revolution(chart)
    raw = spec.raw(chart) if isinstance(spec, BetaSpec) else spec
    weight = _MeridianIntegral(chart, lambda t: area_weight(chart, t))
    moment = _MeridianIntegral(chart, lambda t: raw(t) * area_weight(chart, t))
    mean = moment.total / weight.total
    beta = BetaFunction(chart, raw, mean, spec)
    t = np.linspace(*chart.xi1_range, 2001)
    with np.errstate(divide="ignore", invalid="ignore"):
        raw_vals = np.abs(np.broadcast_to(dual.real(raw(t)), t.shape))
        vals = np.abs(beta.on_boundary(t))
    finite = np.isfinite(raw_vals) & np.isfinite(vals)
    scale = float(np.max(raw_vals[finite], initial=0.0))
    # non-finite samples are a regularity problem, not a degenerate one
    if finite.all() and np.max(vals) <= 1e-12 * max(scale, 1.0):
        raise DegenerateBetaError("boundary data vanishes after removing its mean; Lambda[beta] would be empty")
    return beta


def lemma_beta(chart: SurfaceChart, t_zero: float) -> BetaFunction:
    """Zero-mean data vanishing exactly on the latitude circle ``xi1 = t_zero``.

    ``beta = (z - z0) exp(k z)`` with ``z`` the (scaled) height, which must be
    monotone along the meridian; ``k`` is chosen so the weighted mean vanishes.
    """
    chart = _require_revolution(chart)
    if chart.periodic[0]:
        raise ConstructionError("a zero-mean periodic profile needs at least two zero circles")
    lo, hi = chart.xi1_range
    if not lo < t_zero < hi:
        raise ConstructionError("t_zero must lie strictly inside the meridian range")
    _, z = chart._profile_samples
    if not (np.all(np.diff(z) < 0) or np.all(np.diff(z) > 0)):
        raise ConstructionError("lemma_beta needs a profile with monotone height")
    half = 0.5 * chart.diameter
    z0 = float(chart.meridian(np.array(t_zero))[1]) / half

    def height(t):
        return chart.meridian(t)[1] / half

    def mean_for(k):
        num = _MeridianIntegral(chart, lambda t: (height(t) - z0) * dual.exp(k * height(t)) * area_weight(chart, t))
        return num.total

    k_lo, k_hi = -1.0, 1.0
    while mean_for(k_lo) > 0:
        k_lo *= 2
    while mean_for(k_hi) < 0:
        k_hi *= 2
    k = brentq(mean_for, k_lo, k_hi, xtol=1e-15, rtol=1e-15)

    def raw(t):
        return (height(t) - z0) * dual.exp(k * height(t))

    return make_beta(raw, chart)


def lambda_set(beta, xi1, xi2=None, tol: float = 1e-6) -> np.ndarray:
    """Mask of boundary samples where ``|beta| > tol``."""
    if hasattr(beta, "on_boundary"):
        vals = beta.on_boundary(xi1, xi2)
    elif callable(beta):
        vals = beta(xi1, xi2)
    else:
        vals = beta
    return np.abs(np.asarray(vals, dtype=float)) > tol


# ---------------------------------------------------------------------------
# stream profile


@dataclass(frozen=True, eq=False)
class StreamProfile:
    """``psi_b(t) = int_lo^t beta r ds`` with exact derivatives on dual input."""

    chart: Revolution
    beta: Callable
    integral: _MeridianIntegral
    closure: float

    def density(self, t):
        return self.beta(t) * area_weight(self.chart, t)

    def _plain(self, t):
        t = np.asarray(t, dtype=float)
        if self.chart.periodic[0]:
            lo, hi = self.chart.xi1_range
            t = lo + np.mod(t - lo, hi - lo)
        return self.integral(t)

    def __call__(self, t):
        if isinstance(t, dual.Dual):
            g = self.density(t.re)
            return dual.Dual(self(t.re), [g * d for d in t.du], t.tag)
        return self._plain(t)


def stream_from_beta(chart: SurfaceChart, beta: Callable) -> StreamProfile:
    chart = _require_revolution(chart)
    integral = _MeridianIntegral(chart, lambda t: beta(t) * area_weight(chart, t))
    scale = _MeridianIntegral(chart, lambda t: np.abs(dual.real(beta(t))) * dual.real(area_weight(chart, t))).total
    closure = integral.total
    if abs(closure) > CLOSURE_TOL * max(scale, 1e-300):
        raise ConstraintViolationError(
            f"stream profile does not close: psi(end) = {closure:.3e} (beta is not zero-mean)"
        )
    profile = StreamProfile(chart, beta, integral, closure)
    if not chart.periodic[0]:
        _check_axis_regularity(chart, profile)
    return profile


def _check_axis_regularity(chart: Revolution, profile: StreamProfile) -> None:
    lo, hi = chart.xi1_range
    for end, sign in ((lo, 1.0), (hi, -1.0)):
        ratios = []
        for delta in (1e-2, 1e-3, 1e-4):
            t = np.array(end + sign * delta * (hi - lo))
            r = float(chart.meridian(t)[0])
            ratios.append(abs(float(profile(t))) / r**2)
        if ratios[-1] > 10.0 * ratios[0] + 1e-6:
            raise RegularityError("psi / r^2 is unbounded at the axis; a = psi / r would not be smooth")


# ---------------------------------------------------------------------------
# admissible fields


@dataclass(frozen=True)
class Certificate:
    div_max: float
    normal_max: float
    tangential_vorticity_max: float
    beta_fidelity: float | None
    boundary_samples: int
    interior_samples: int
    seed: int
    tol: float
    constraint_residual: float | None = None

    @property
    def admissible(self) -> bool:
        ok = max(self.div_max, self.normal_max, self.tangential_vorticity_max) <= self.tol
        if self.constraint_residual is not None:
            ok = ok and self.constraint_residual <= self.tol
        return bool(ok)

    def to_dict(self) -> dict:
        return {
            "div_max": self.div_max,
            "normal_max": self.normal_max,
            "tangential_vorticity_max": self.tangential_vorticity_max,
            "beta_fidelity": self.beta_fidelity,
            "constraint_residual": self.constraint_residual,
            "boundary_samples": self.boundary_samples,
            "interior_samples": self.interior_samples,
            "seed": self.seed,
            "tol": self.tol,
            "admissible": self.admissible,
        }


@dataclass(frozen=True, eq=False)
class AdmissibleField:
    """A field ``a``, its vorticity ``b = curl a`` and the certificate for them."""

    a: AnalyticField
    b: AnalyticField
    chart: SurfaceChart
    certificate: Certificate
    provenance: dict = field(default_factory=dict)
    beta: Callable | None = None

    @property
    def admissible(self) -> bool:
        return self.certificate.admissible

    def scaled(self, c: float) -> "AdmissibleField":
        a = self.a.scaled(c)
        return AdmissibleField(a, curl_field(a), self.chart, self.certificate, {**self.provenance, "scale": c})


def check_admissible(
    f: AnalyticField,
    chart: SurfaceChart,
    samples: int = 10_000,
    seed: int = 12345,
    tol: float = CERTIFICATE_TOL,
    beta: Callable | None = None,
) -> Certificate:
    """Max of ``|div f|`` in the domain, ``|f.n|`` and ``|curl f x n|`` on the boundary."""
    u, v = chart.sample(samples, seed)
    frame = surface_frame(chart, u, v)
    interior = chart.interior_sample(samples, seed + 1)
    div = np.abs(div_exact(f, np.concatenate([frame.position, interior])))
    fa = f(frame.position)
    fb = curl_exact(f, frame.position)
    normal = np.abs(np.sum(fa * frame.n, axis=-1))
    tang = np.linalg.norm(np.cross(fb, frame.n), axis=-1)
    fidelity = None
    if beta is not None:
        bn = np.sum(fb * frame.n, axis=-1)
        target = beta.on_boundary(u, v) if hasattr(beta, "on_boundary") else beta(u, v)
        fidelity = float(np.max(np.abs(bn - target)))
    return Certificate(
        div_max=float(np.max(div)),
        normal_max=float(np.max(normal)),
        tangential_vorticity_max=float(np.max(tang)),
        beta_fidelity=fidelity,
        boundary_samples=int(samples),
        interior_samples=int(samples),
        seed=int(seed),
        tol=float(tol),
    )


def _cutoff(s):
    inside = np.abs(dual.real(s)) <= 1.0
    one_minus = 1.0 - s * s
    return inside, dual.where(inside, one_minus * one_minus * one_minus, 0.0)


def _nearest_parameter(chart: Revolution, rho, z, grid: int = 1024):
    """Foot point of the normal through ``(rho, z)`` in the meridian half-plane.

    A grid search seeds Newton on ``(X - P(t)) . P'(t) = 0`` in floats; three
    further Newton steps in dual arithmetic carry the exact derivatives.
    """
    rho_f, z_f = dual.real(rho), dual.real(z)
    rho_f, z_f = np.broadcast_arrays(rho_f, z_f)
    lo, hi = chart.xi1_range
    tg = np.linspace(lo, hi, grid)
    rg, zg = chart.meridian(tg)
    rg = np.broadcast_to(rg, tg.shape)
    zg = np.broadcast_to(zg, tg.shape)
    flat_r, flat_z = rho_f.reshape(-1), z_f.reshape(-1)
    t = np.empty_like(flat_r)
    chunk = 2048
    for start in range(0, flat_r.size, chunk):
        sl = slice(start, start + chunk)
        dist = (flat_r[sl, None] - rg[None, :]) ** 2 + (flat_z[sl, None] - zg[None, :]) ** 2
        t[sl] = tg[np.argmin(dist, axis=1)]
    t = t.reshape(rho_f.shape)

    def newton_step(t, R, Z):
        r, zz, dr, dz, ddr, ddz = _profile_derivs(chart, t)
        er, ez = R - r, Z - zz
        F = er * dr + ez * dz
        dF = -(dr * dr + dz * dz) + er * ddr + ez * ddz
        return t - F / dF

    for _ in range(50):
        t_new = newton_step(t, rho_f, z_f)
        if not chart.periodic[0]:
            t_new = np.clip(t_new, lo - 0.5 * (hi - lo), hi + 0.5 * (hi - lo))
        done = np.max(np.abs(t_new - t)) <= 1e-15 * max(1.0, hi - lo)
        t = t_new
        if done:
            break
    for _ in range(3):
        t = newton_step(t, rho, z)
    return t


def _psi_field(chart: Revolution, stream: StreamProfile, width: float) -> AnalyticField:
    def func(x, y, z):
        rho2 = x * x + y * y
        rho = dual.sqrt(rho2)
        t = _nearest_parameter(chart, rho, z)
        r, zz, dr, dz, _, _ = _profile_derivs(chart, t)
        speed = dual.sqrt(dr * dr + dz * dz)
        # outward normal in the meridian plane is the left normal (-z', r') / |P'|
        d = ((rho - r) * (-dz) + (z - zz) * dr) / speed
        inside, chi = _cutoff(d / width)
        psi = stream(t) * chi
        coef = dual.where(inside, psi / rho2, 0.0)
        return -coef * y, coef * x, 0.0 * coef

    return AnalyticField(func, "psi/r^2 * (-y, x, 0)")


def admissible_from_beta(
    chart: SurfaceChart,
    beta: BetaFunction | Callable,
    cutoff_width: float | None = None,
    samples: int = 10_000,
    seed: int = 12345,
) -> AdmissibleField:
    """Closed-form admissible field whose boundary vorticity is ``beta * n``."""
    chart = _require_revolution(chart)
    reach = chart.reach
    width = 0.2 * reach if cutoff_width is None else float(cutoff_width)
    if not 0.0 < width <= reach:
        raise FocalPointError(f"cutoff width {width:.6g} exceeds the focal distance {reach:.6g}")
    stream = stream_from_beta(chart, beta)
    a = _psi_field(chart, stream, width)
    b = curl_field(a)
    if not hasattr(beta, "on_boundary"):
        fn = beta
        beta_eval = lambda u, v: np.broadcast_to(dual.real(fn(np.asarray(u, float))), np.shape(u))
    else:
        beta_eval = beta
    cert = check_admissible(a, chart, samples, seed, beta=beta_eval)
    prov = {
        "family": "stream",
        "cutoff_width": width,
        "closure": stream.closure,
        "beta": beta.describe() if hasattr(beta, "describe") else "callable",
    }
    return AdmissibleField(a, b, chart, cert, prov, beta)


def named_ball_field(
    g: str | Callable = "2 - rho**2",
    R: float = 1.0,
    samples: int = 10_000,
    seed: int = 12345,
) -> AdmissibleField:
    """``a = g(rho) (-y, x, 0)`` on the ball of radius ``R``.

    Admissible iff ``R g'(R) + 2 g(R) = 0``; otherwise the returned field is
    flagged as not admissible (a negative control), never repaired.
    """
    gf = compile_expression(g, ("rho",)) if isinstance(g, str) else g
    tag = g if isinstance(g, str) else getattr(g, "__name__", "g")

    def func(x, y, z):
        rho = dual.sqrt(x * x + y * y + z * z)
        gv = gf(rho) + 0.0 * rho
        return -gv * y, gv * x, 0.0 * gv

    a = AnalyticField(func, f"({tag})*(-y, x, 0)")
    g_r = float(dual.real(gf(np.array(R)) + 0.0))
    dg_r = float(dual.real(dual.derivative(lambda r: gf(r) + 0.0 * r, np.array(R))))
    residual = abs(R * dg_r + 2.0 * g_r)
    chart = sphere(R)
    cert = check_admissible(a, chart, samples, seed, beta=lambda u, v: 2.0 * g_r * np.cos(u))
    cert = Certificate(**{**cert.__dict__, "constraint_residual": residual})
    prov = {"family": "ball", "g": tag, "R": R, "g(R)": g_r, "g'(R)": dg_r}
    beta = BallBeta(2.0 * g_r)
    return AdmissibleField(a, curl_field(a), chart, cert, prov, beta)


@dataclass(frozen=True)
class BallBeta:
    """``b.n = 2 g(R) cos(theta)`` on the sphere for the ball family."""

    amplitude: float

    def __call__(self, t):
        return self.amplitude * dual.cos(t)

    def on_boundary(self, xi1, xi2=None):
        return self.amplitude * np.cos(np.asarray(xi1, dtype=float))

    def describe(self) -> dict:
        return {"closed_form": f"{self.amplitude:g}*cos(theta)"}


def rigid_rotation(R: float = 1.0, samples: int = 10_000, seed: int = 12345) -> AdmissibleField:
    """``a = e3 x x``: the standard negative control (vorticity ``2 e3`` is not normal)."""
    return named_ball_field("1", R, samples, seed)


def slab_stream_field(
    chart: Slab,
    modes: tuple[int, int] = (1, 1),
    amplitude: float = 1.0,
    cutoff_width: float | None = None,
    samples: int = 10_000,
    seed: int = 12345,
) -> AdmissibleField:
    """Flat-boundary control: ``a = chi(z) (-d_y psi0, d_x psi0, 0)``, ``psi0 = A sin(kx x) cos(ky y)``."""
    if not isinstance(chart, Slab):
        raise GeometryError("slab_stream_field needs a slab chart")
    L = chart.params["length"]
    kx, ky = (2.0 * math.pi * m / L for m in modes)
    width = 0.5 * chart.reach if cutoff_width is None else float(cutoff_width)
    if not 0.0 < width <= chart.reach:
        raise FocalPointError("cutoff width exceeds the slab depth")

    def func(x, y, z):
        inside, chi = _cutoff(z / width)
        ax = amplitude * ky * dual.sin(kx * x) * dual.sin(ky * y)
        ay = amplitude * kx * dual.cos(kx * x) * dual.cos(ky * y)
        return chi * ax, chi * ay, 0.0 * chi

    a = AnalyticField(func, f"slab stream modes={modes}")
    lap = -(kx * kx + ky * ky) * amplitude
    beta = lambda u, v: lap * np.sin(kx * np.asarray(u)) * np.cos(ky * np.asarray(v))
    cert = check_admissible(a, chart, samples, seed, beta=beta)
    prov = {"family": "slab", "modes": list(modes), "amplitude": amplitude, "cutoff_width": width}
    return AdmissibleField(a, curl_field(a), chart, cert, prov, beta)
