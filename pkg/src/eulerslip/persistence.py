"""Boundary identity for admissible fields and the persistence-failure scan.

For an admissible field ``a`` with vorticity ``b = curl a`` the tangential
vector ``curl(a x b) x n`` is the initial rate of change of ``omega x n``
under Euler evolution.  On the boundary it reduces to

    curl(a x b) x n = -2 b3 (k2 a2 i1 - k1 a1 i2)

in a curvature-line frame.  The left side is computed here by exact
Cartesian differentiation, the right side from frame components and
principal curvatures, so comparing them is a genuine two-route check.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .construct import AdmissibleField
from .curvcalc import FrameComponents, cross_field, curl_exact, to_frame
from .geometry import BoundaryFrame, GeometryError, SurfaceChart, surface_frame

CHUNK = 512
THREADS_ENV = "EULERSLIP_THREADS"


class PreconditionError(ValueError):
    """The field does not satisfy the admissibility precondition."""


@dataclass(frozen=True)
class Tolerances:
    identity: float = 1e-8
    sigma: float = 1e-8
    lam: float = 1e-6
    criterion: float = 1e-6  # relative to (max boundary |a|)^2
    margin_factor: float = 10.0

    def __post_init__(self):
        for name in ("identity", "sigma", "lam", "criterion", "margin_factor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"tolerance {name} must be > 0")

    def to_dict(self) -> dict:
        return {
            "identity": self.identity,
            "sigma": self.sigma,
            "lambda": self.lam,
            "criterion": self.criterion,
            "margin_factor": self.margin_factor,
        }


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# the two sides of the identity


def identity_lhs(field: AdmissibleField, frame: BoundaryFrame) -> np.ndarray:
    """``curl(a x b)(x) x n`` by exact differentiation of the product field."""
    product = cross_field(field.a, field.b)
    c = curl_exact(product, frame.position)
    return np.cross(c, frame.n)


def identity_rhs(a_comp: FrameComponents, b3, frame: BoundaryFrame) -> np.ndarray:
    """``-2 b3 (k2 a2 i1 - k1 a1 i2)`` as a Cartesian vector."""
    b3 = np.asarray(b3, dtype=float)[..., None]
    t1 = (np.asarray(frame.kappa2) * np.asarray(a_comp.v2))[..., None] * frame.i1
    t2 = (np.asarray(frame.kappa1) * np.asarray(a_comp.v1))[..., None] * frame.i2
    return -2.0 * b3 * (t1 - t2)


def persistence_rate(field: AdmissibleField, frame: BoundaryFrame) -> np.ndarray:
    """``d/dt (omega x n)`` at ``t = 0`` for Euler flow started from ``field.a``.

    Taking ``x n`` of the vorticity equation gives
    ``d/dt (omega x n) = curl(u x omega) x n``; a nonzero value means the slip
    condition ``omega x n = 0`` is lost immediately.
    """
    return identity_lhs(field, frame)


# ---------------------------------------------------------------------------
# scans


@dataclass(frozen=True)
class IdentitySample:
    frame: BoundaryFrame
    a_comp: FrameComponents
    b_comp: FrameComponents
    lhs: np.ndarray
    rhs: np.ndarray
    deviation: float
    in_sigma: bool
    in_lambda: bool
    in_k: bool
    criterion_holds: bool
    certified: bool
    corollary: bool


@dataclass
class ScanReport:
    """Columnar per-sample records plus aggregates.

    ``verdict`` is ``persistence_fails`` iff some sample satisfies the
    criterion with ``|lhs|`` above ``margin_factor`` times the identity
    deviation at that point.
    """

    frame: BoundaryFrame
    a_comp: FrameComponents
    b_comp: FrameComponents
    lhs: np.ndarray
    rhs: np.ndarray
    tolerances: Tolerances
    provenance: dict = field(default_factory=dict)
    field_scale: float = 0.0

    def __post_init__(self):
        self.deviation = np.linalg.norm(self.lhs - self.rhs, axis=-1)
        self.lhs_norm = np.linalg.norm(self.lhs, axis=-1)
        self.rhs_norm = np.linalg.norm(self.rhs, axis=-1)
        tol = self.tolerances
        self.k_threshold = tol.criterion * self.field_scale**2
        b3 = np.asarray(self.b_comp.v3)
        self.in_sigma = np.abs(self.frame.kappa1 * self.frame.kappa2) > tol.sigma
        self.in_lambda = np.abs(b3) > tol.lam
        self.in_k = self.lhs_norm > self.k_threshold
        self.criterion_holds = self.in_k
        self.certified = self.in_k & (self.lhs_norm > tol.margin_factor * self.deviation)
        ka = np.maximum(
            np.abs(self.frame.kappa1 * self.a_comp.v1), np.abs(self.frame.kappa2 * self.a_comp.v2)
        )
        self.corollary = self.in_lambda & (2.0 * np.abs(b3) * ka > self.k_threshold)

    def __len__(self) -> int:
        return len(self.deviation)

    @property
    def max_deviation(self) -> float:
        return float(np.max(self.deviation)) if len(self) else 0.0

    @property
    def max_lhs(self) -> float:
        return float(np.max(self.lhs_norm)) if len(self) else 0.0

    @property
    def fraction_criterion(self) -> float:
        return float(np.count_nonzero(self.criterion_holds)) / max(len(self), 1)

    @property
    def verdict(self) -> str:
        return "persistence_fails" if bool(np.any(self.certified)) else "inconclusive"

    def passed(self, tol: float | None = None) -> bool:
        return self.max_deviation <= (self.tolerances.identity if tol is None else tol)

    def sample(self, i: int) -> IdentitySample:
        return IdentitySample(
            frame=self.frame.take(i),
            a_comp=FrameComponents(*(np.asarray(c)[i] for c in (self.a_comp.v1, self.a_comp.v2, self.a_comp.v3))),
            b_comp=FrameComponents(*(np.asarray(c)[i] for c in (self.b_comp.v1, self.b_comp.v2, self.b_comp.v3))),
            lhs=self.lhs[i],
            rhs=self.rhs[i],
            deviation=float(self.deviation[i]),
            in_sigma=bool(self.in_sigma[i]),
            in_lambda=bool(self.in_lambda[i]),
            in_k=bool(self.in_k[i]),
            criterion_holds=bool(self.criterion_holds[i]),
            certified=bool(self.certified[i]),
            corollary=bool(self.corollary[i]),
        )

    def summary(self) -> dict:
        n = max(len(self), 1)
        return {
            "samples": len(self),
            "max_deviation": self.max_deviation,
            "max_lhs": self.max_lhs,
            "field_scale": self.field_scale,
            "criterion_threshold": self.k_threshold,
            "fraction_criterion": self.fraction_criterion,
            "fraction_sigma": float(np.count_nonzero(self.in_sigma)) / n,
            "fraction_lambda": float(np.count_nonzero(self.in_lambda)) / n,
            "fraction_corollary": float(np.count_nonzero(self.corollary)) / n,
            "certified_samples": int(np.count_nonzero(self.certified)),
            "verdict": self.verdict,
        }


def _require_admissible(field: AdmissibleField) -> None:
    if not field.admissible:
        cert = field.certificate
        raise PreconditionError(
            "field is not admissible: "
            f"max|div a| = {cert.div_max:.3e}, max|a.n| = {cert.normal_max:.3e}, "
            f"max|curl a x n| = {cert.tangential_vorticity_max:.3e}"
            + (f", constraint residual = {cert.constraint_residual:.3e}" if cert.constraint_residual is not None else "")
            + f" (tol {cert.tol:g})"
        )


def _evaluate_chunk(field: AdmissibleField, chart: SurfaceChart, u, v):
    frame = surface_frame(chart, u, v)
    a = field.a(frame.position)
    b = field.b(frame.position)
    a_comp = to_frame(a, frame)
    b_comp = to_frame(b, frame)
    lhs = identity_lhs(field, frame)
    rhs = identity_rhs(a_comp, b_comp.v3, frame)
    return frame, a_comp, b_comp, lhs, rhs


def _concat_frames(frames) -> BoundaryFrame:
    keys = BoundaryFrame.__dataclass_fields__
    return BoundaryFrame(**{k: np.concatenate([getattr(f, k) for f in frames]) for k in keys})


def _concat_comps(comps) -> FrameComponents:
    return FrameComponents(*(np.concatenate([getattr(c, k) for c in comps]) for k in ("v1", "v2", "v3")))


def evaluate_samples(field: AdmissibleField, chart: SurfaceChart, xi1, xi2, workers: int | None = None):
    """Evaluate both identity sides at the given parameters.

    Work is split into fixed-size chunks independent of ``workers`` so the
    numbers are bit-identical for any thread count.
    """
    xi1 = np.atleast_1d(np.asarray(xi1, dtype=float))
    xi2 = np.atleast_1d(np.asarray(xi2, dtype=float))
    workers = default_workers() if workers is None else max(1, int(workers))
    bounds = [(s, min(s + CHUNK, xi1.size)) for s in range(0, xi1.size, CHUNK)]
    job = lambda se: _evaluate_chunk(field, chart, xi1[se[0]:se[1]], xi2[se[0]:se[1]])
    if workers == 1:
        parts = [job(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, bounds))
    frame = _concat_frames([p[0] for p in parts])
    a_comp = _concat_comps([p[1] for p in parts])
    b_comp = _concat_comps([p[2] for p in parts])
    lhs = np.concatenate([p[3] for p in parts])
    rhs = np.concatenate([p[4] for p in parts])
    return frame, a_comp, b_comp, lhs, rhs


def criterion_scan(
    field: AdmissibleField,
    chart: SurfaceChart | None = None,
    samples: int = 10_000,
    seed: int = 0,
    tols: Tolerances | None = None,
    workers: int | None = None,
) -> ScanReport:
    """Flag Sigma / Lambda / K membership at low-discrepancy boundary samples."""
    _require_admissible(field)
    chart = field.chart if chart is None else chart
    tols = Tolerances() if tols is None else tols
    u, v = chart.sample(samples, seed)
    frame, a_comp, b_comp, lhs, rhs = evaluate_samples(field, chart, u, v, workers)
    a_norm = np.sqrt(a_comp.v1**2 + a_comp.v2**2 + a_comp.v3**2)
    scale = float(np.max(a_norm)) if a_norm.size else 0.0
    prov = {
        "chart": chart.describe(),
        "field": {"tag": field.a.tag, **field.provenance},
        "samples": int(samples),
        "seed": int(seed),
        "tolerances": tols.to_dict(),
    }
    return ScanReport(frame, a_comp, b_comp, lhs, rhs, tols, prov, scale)


def verify_identity(
    field: AdmissibleField,
    chart: SurfaceChart | None = None,
    samples: int = 10_000,
    tol: float = 1e-8,
    seed: int = 0,
    workers: int | None = None,
    tols: Tolerances | None = None,
) -> ScanReport:
    """Scan with the identity tolerance set to ``tol``; check ``report.passed()``."""
    tols = Tolerances(identity=tol) if tols is None else tols
    return criterion_scan(field, chart, samples, seed, tols, workers)


# ---------------------------------------------------------------------------
# proposition and proof steps


def _components_at(field: AdmissibleField, chart: SurfaceChart, u, v):
    frame = surface_frame(chart, u, v)
    return frame, to_frame(field.a(frame.position), frame)


def surface_curl_b3(field: AdmissibleField, chart: SurfaceChart, xi1, xi2, step: float | None = None):
    """``(1/(h1 h2)) (d(h2 a2)/dxi1 - d(h1 a1)/dxi2)`` by central differences.

    Returns ``(formula_value, exact_b_dot_n)``; they agree to ``O(step^2)``.
    ``step`` is a physical length (default ``1e-4 * diameter``).
    """
    u = np.atleast_1d(np.asarray(xi1, dtype=float))
    v = np.atleast_1d(np.asarray(xi2, dtype=float))
    step = 1e-4 * chart.diameter if step is None else float(step)
    frame, _ = _components_at(field, chart, u, v)
    d1 = step / frame.h1
    d2 = step / frame.h2
    fp, cp = _components_at(field, chart, u + d1, v)
    fm, cm = _components_at(field, chart, u - d1, v)
    gp, ep = _components_at(field, chart, u, v + d2)
    gm, em = _components_at(field, chart, u, v - d2)
    d_h2a2 = (fp.h2 * cp.v2 - fm.h2 * cm.v2) / (2 * d1)
    d_h1a1 = (gp.h1 * ep.v1 - gm.h1 * em.v1) / (2 * d2)
    formula = (d_h2a2 - d_h1a1) / (frame.h1 * frame.h2)
    exact = np.sum(field.b(frame.position) * frame.n, axis=-1)
    return formula, exact


@dataclass
class WitnessResult:
    x0: np.ndarray
    b3: float
    witnesses: list  # (radius, position, j, a_j) or (radius, None, None, None)
    surface_curl: float
    surface_curl_error: float

    @property
    def found_all(self) -> bool:
        return all(w[1] is not None for w in self.witnesses)


def _candidate_offsets(rings: int = 4, directions: int = 16):
    out = [(0.0, 0.0)]
    for k in range(1, rings + 1):
        f = k / rings
        for m in range(directions):
            ang = 2 * math.pi * m / directions
            out.append((f * math.cos(ang), f * math.sin(ang)))
    return np.array(out)


def find_witnesses(
    field: AdmissibleField,
    chart: SurfaceChart,
    xi1,
    xi2,
    radius: float,
    witness_tol: float = 1e-9,
):
    """For each point, a boundary point within ``radius`` with ``|a_j| > witness_tol``.

    Returns ``(found, j_index, a_value, distance, position)``; candidates are
    the point itself, then rings of tangent-plane offsets.
    """
    u = np.atleast_1d(np.asarray(xi1, dtype=float))
    v = np.atleast_1d(np.asarray(xi2, dtype=float))
    frame, comp = _components_at(field, chart, u, v)
    found = np.zeros(u.shape, bool)
    j_idx = np.full(u.shape, -1)
    a_val = np.zeros(u.shape)
    dist = np.full(u.shape, np.inf)
    where_found = np.full(frame.position.shape, np.nan)
    lo1, hi1 = chart.xi1_range
    for o1, o2 in _candidate_offsets():
        todo = ~found
        if not np.any(todo):
            break
        cu = u[todo] + 0.9 * radius * o1 / frame.h1[todo]
        cv = v[todo] + 0.9 * radius * o2 / frame.h2[todo]
        if not chart.periodic[0]:
            cu = np.clip(cu, lo1, hi1)
        try:
            cf, cc = _components_at(field, chart, cu, cv)
        except GeometryError:
            continue
        d = np.linalg.norm(cf.position - frame.position[todo], axis=-1)
        a1, a2 = np.abs(cc.v1), np.abs(cc.v2)
        ok = (d <= radius) & (np.maximum(a1, a2) > witness_tol)
        idx = np.flatnonzero(todo)[ok]
        found[idx] = True
        j_idx[idx] = np.where(a1[ok] >= a2[ok], 1, 2)
        a_val[idx] = np.where(a1[ok] >= a2[ok], cc.v1[ok], cc.v2[ok])
        dist[idx] = d[ok]
        where_found[idx] = cf.position[ok]
    return found, j_idx, a_val, dist, where_found


def proposition_witness(
    field: AdmissibleField,
    chart: SurfaceChart,
    xi1: float,
    xi2: float,
    radii,
    tol: float = 1e-6,
    witness_tol: float = 1e-9,
    step: float | None = None,
) -> WitnessResult:
    """Witness sequence ``x_n -> x0`` with a nonzero tangential component of ``a``.

    Requires ``|b3(x0)| > tol``.  A missing witness is reported, not hidden.
    """
    frame, _ = _components_at(field, chart, np.array([xi1]), np.array([xi2]))
    b3 = float(np.sum(field.b(frame.position) * frame.n, axis=-1)[0])
    if not abs(b3) > tol:
        raise PreconditionError(f"|b3(x0)| = {abs(b3):.3e} does not exceed {tol:g}")
    witnesses = []
    for radius in radii:
        found, j, aj, _, pos = find_witnesses(field, chart, [xi1], [xi2], radius, witness_tol)
        if found[0]:
            witnesses.append((float(radius), pos[0], int(j[0]), float(aj[0])))
        else:
            witnesses.append((float(radius), None, None, None))
    formula, exact = surface_curl_b3(field, chart, [xi1], [xi2], step)
    return WitnessResult(frame.position[0], b3, witnesses, float(formula[0]), float(abs(formula[0] - exact[0])))


def proof_step_residuals(field: AdmissibleField, chart: SurfaceChart, xi1, xi2, step: float | None = None) -> dict:
    """Residuals of each intermediate identity used to derive the boundary formula.

    Normal derivatives are exact (frames are constant along normal lines);
    tangential derivatives of the vanishing components use central
    differences with physical ``step``.
    """
    u = np.atleast_1d(np.asarray(xi1, dtype=float))
    v = np.atleast_1d(np.asarray(xi2, dtype=float))
    step = 1e-4 * chart.diameter if step is None else float(step)
    frame = surface_frame(chart, u, v)
    x = frame.position
    a = to_frame(field.a(x), frame)
    b = to_frame(field.b(x), frame)
    out = {"a3": np.abs(a.v3), "b1": np.abs(b.v1), "b2": np.abs(b.v2)}

    d1, d2 = step / frame.h1, step / frame.h2
    lo, hi = chart.xi1_range
    shifts = {"xi1": (d1, 0.0), "xi2": (0.0, d2)}
    for name, (s1, s2) in shifts.items():
        fp = surface_frame(chart, u + s1, v + s2)
        fm = surface_frame(chart, u - s1, v - s2)
        ap, am = to_frame(field.a(fp.position), fp), to_frame(field.a(fm.position), fm)
        bp, bm = to_frame(field.b(fp.position), fp), to_frame(field.b(fm.position), fm)
        h = 2.0 * (s1 if name == "xi1" else s2)
        out[f"d_a3_d{name}"] = np.abs((ap.v3 - am.v3) / h)
        out[f"d_b1_d{name}"] = np.abs((bp.v1 - bm.v1) / h)
        out[f"d_b2_d{name}"] = np.abs((bp.v2 - bm.v2) / h)

    Ja = field.a.jacobian(x)
    Jb = field.b.jacobian(x)
    dn_a = np.einsum("nij,nj->ni", Ja, frame.n)
    dn_b = np.einsum("nij,nj->ni", Jb, frame.n)
    da1 = np.sum(dn_a * frame.i1, axis=-1)
    da2 = np.sum(dn_a * frame.i2, axis=-1)
    db3 = np.sum(dn_b * frame.n, axis=-1)
    out["normal_a1"] = np.abs(da1 + frame.kappa1 * a.v1)
    out["normal_a2"] = np.abs(da2 + frame.kappa2 * a.v2)
    out["normal_b3"] = np.abs(db3 + (frame.kappa1 + frame.kappa2) * b.v3)

    c = to_frame(curl_exact(cross_field(field.a, field.b), x), frame)
    out["curl_ab_1"] = np.abs(c.v1 + 2.0 * frame.kappa1 * a.v1 * b.v3)
    out["curl_ab_2"] = np.abs(c.v2 + 2.0 * frame.kappa2 * a.v2 * b.v3)
    return out


# ---------------------------------------------------------------------------
# Navier stress diagnostic


def navier_stress_gap(field: AdmissibleField, frame: BoundaryFrame, tau, nu: float = 1.0):
    """``((nu/2) (omega x n).tau, nu (W tau).u)`` at boundary points.

    ``W tau = k1 (tau.i1) i1 + k2 (tau.i2) i2`` is the shape operator applied
    to ``tau``.  For ``u.n = 0`` the tangential stress
    ``(nu/2) ((grad u + grad u^T) n).tau`` equals ``slip_term - curvature_term``,
    so for admissible fields (slip term zero) the two boundary conditions
    differ exactly by the curvature term.
    """
    tau = np.asarray(tau, dtype=float)
    n = np.asarray(frame.n)
    tau_b, n_b = np.broadcast_arrays(tau, n)
    if np.any(np.abs(np.linalg.norm(tau_b, axis=-1) - 1.0) > 1e-10):
        raise GeometryError("tau must be a unit vector")
    if np.any(np.abs(np.sum(tau_b * n_b, axis=-1)) > 1e-10):
        raise GeometryError("tau must be tangential to the boundary")
    x = frame.position
    u = field.a(x)
    omega = field.b(x)
    slip = 0.5 * nu * np.sum(np.cross(omega, n) * tau_b, axis=-1)
    c1 = np.sum(tau_b * frame.i1, axis=-1)
    c2 = np.sum(tau_b * frame.i2, axis=-1)
    u1 = np.sum(u * frame.i1, axis=-1)
    u2 = np.sum(u * frame.i2, axis=-1)
    curvature = nu * (frame.kappa1 * c1 * u1 + frame.kappa2 * c2 * u2)
    return slip, curvature
