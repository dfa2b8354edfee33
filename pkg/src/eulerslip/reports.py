"""JSON and CSV serialization of scan reports, certificates and curvature tables.

Output is byte-deterministic: floats are written with ``repr`` (shortest
round-trip form), JSON keys are sorted, and nothing time-dependent is
recorded.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from . import __version__
from .persistence import ScanReport

SCAN_SCHEMA = "eulerslip.scan/1"
CERTIFICATE_SCHEMA = "eulerslip.certificate/1"
GEOMETRY_SCHEMA = "eulerslip.geometry/1"

SCAN_COLUMNS = (
    "xi1",
    "xi2",
    "kappa1",
    "kappa2",
    "a1",
    "a2",
    "b3",
    "lhs_norm",
    "rhs_norm",
    "deviation",
    "in_sigma",
    "in_lambda",
    "in_K",
    "criterion_holds",
    "certified",
    "corollary",
)
GEOMETRY_COLUMNS = ("xi1", "xi2", "kappa1", "kappa2", "gaussian", "in_sigma")


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    return repr(float(value))


def _write_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dumps(payload: dict) -> str:
    return json.dumps(_clean(payload), sort_keys=True, indent=2) + "\n"


def scan_columns(report: ScanReport) -> dict[str, np.ndarray]:
    f = report.frame
    return {
        "xi1": f.xi1,
        "xi2": f.xi2,
        "kappa1": f.kappa1,
        "kappa2": f.kappa2,
        "a1": report.a_comp.v1,
        "a2": report.a_comp.v2,
        "b3": report.b_comp.v3,
        "lhs_norm": report.lhs_norm,
        "rhs_norm": report.rhs_norm,
        "deviation": report.deviation,
        "in_sigma": report.in_sigma,
        "in_lambda": report.in_lambda,
        "in_K": report.in_k,
        "criterion_holds": report.criterion_holds,
        "certified": report.certified,
        "corollary": report.corollary,
    }


def scan_csv(report: ScanReport) -> str:
    cols = scan_columns(report)
    return _write_csv(SCAN_COLUMNS, zip(*(cols[c] for c in SCAN_COLUMNS)))


def scan_json(report: ScanReport, config: dict | None = None, per_sample: bool = False, extra: dict | None = None) -> str:
    payload = {
        "schema": SCAN_SCHEMA,
        "version": __version__,
        "config": config or {},
        "provenance": report.provenance,
        "summary": report.summary(),
        "csv_columns": list(SCAN_COLUMNS),
    }
    if extra:
        payload.update(extra)
    if per_sample:
        cols = scan_columns(report)
        payload["samples"] = {c: cols[c] for c in SCAN_COLUMNS}
    return dumps(payload)


def certificate_json(certificate: dict, provenance: dict, config: dict | None = None) -> str:
    return dumps(
        {
            "schema": CERTIFICATE_SCHEMA,
            "version": __version__,
            "config": config or {},
            "provenance": provenance,
            "certificate": certificate,
        }
    )


def geometry_csv(frame, in_sigma) -> str:
    rows = zip(frame.xi1, frame.xi2, frame.kappa1, frame.kappa2, frame.gaussian, in_sigma)
    return _write_csv(GEOMETRY_COLUMNS, rows)


def geometry_json(summary: dict, config: dict | None = None) -> str:
    return dumps(
        {
            "schema": GEOMETRY_SCHEMA,
            "version": __version__,
            "config": config or {},
            "summary": summary,
            "csv_columns": list(GEOMETRY_COLUMNS),
        }
    )


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path
