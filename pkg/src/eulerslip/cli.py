"""Command-line front end: ``eulerslip {geometry,construct,verify,scan} --config run.yaml``.

Exit codes: 0 success, 1 verification failed, 2 configuration error,
3 precondition error (the field is not admissible).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, reports
from .config import ConfigError, RunConfig, load_config
from .construct import (
    AdmissibleField,
    ConstructionError,
    admissible_from_beta,
    make_beta,
    named_ball_field,
    rigid_rotation,
    slab_stream_field,
)
from .geometry import GeometryError, sigma_membership, surface_frame
from .persistence import PreconditionError, criterion_scan

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_PRECONDITION = 0, 1, 2, 3


class _Run:
    def __init__(self, config: RunConfig, out: Path, quiet: bool):
        self.config = config
        self.out = out
        self.quiet = quiet

    def say(self, msg: str) -> None:
        if not self.quiet:
            print(msg)

    def emit(self, name: str, text: str) -> None:
        path = reports.write_text(self.out / name, text)
        self.say(f"wrote {path}")

    def wants(self, fmt: str) -> bool:
        return fmt in self.config.output["formats"]


def build_field(config: RunConfig) -> AdmissibleField:
    chart = config.build_chart()
    fld = config.field
    n, seed = config.scan["certificate_samples"], 12345
    family = fld["family"]
    if family == "ball":
        return named_ball_field(fld["g"], config.chart["R"], n, seed)
    if family == "rigid_rotation":
        return rigid_rotation(config.chart["R"], n, seed)
    if family == "slab":
        return slab_stream_field(chart, tuple(fld["modes"]), fld["amplitude"], fld["cutoff_width"], n, seed)
    beta = make_beta(config.beta_spec(), chart)
    return admissible_from_beta(chart, beta, fld["cutoff_width"], n, seed)


def cmd_geometry(run: _Run) -> int:
    chart = run.config.build_chart()
    n1, n2 = run.config.scan["grid"]
    axes = []
    for axis, n in enumerate((n1, n2)):
        lo, hi = chart._sampling_range(axis)
        axes.append(np.linspace(lo, hi, n, endpoint=not chart.periodic[axis]))
    u, v = (g.ravel() for g in np.meshgrid(*axes, indexing="ij"))
    frame = surface_frame(chart, u, v)
    in_sigma = sigma_membership(frame, run.config.scan["tolerances"]["sigma"])
    gauss = frame.gaussian
    summary = {
        "chart": chart.describe(),
        "rows": int(len(u)),
        "grid": [int(n1), int(n2)],
        "kappa1_range": [float(frame.kappa1.min()), float(frame.kappa1.max())],
        "kappa2_range": [float(frame.kappa2.min()), float(frame.kappa2.max())],
        "gaussian_range": [float(gauss.min()), float(gauss.max())],
        "fraction_in_sigma": float(np.mean(in_sigma)),
        "focal_distance": float(chart.focal_distance),
        "diameter": float(chart.diameter),
    }
    if run.wants("csv"):
        run.emit("geometry.csv", reports.geometry_csv(frame, in_sigma))
    if run.wants("json"):
        run.emit("geometry.json", reports.geometry_json(summary, run.config.resolved()))
    run.say(f"geometry: {summary['rows']} rows, fraction in Sigma {summary['fraction_in_sigma']:.4f}")
    return EXIT_OK


def cmd_construct(run: _Run) -> int:
    field = build_field(run.config)
    cert = field.certificate.to_dict()
    run.emit("certificate.json", reports.certificate_json(cert, field.provenance, run.config.resolved()))
    verdict = "admissible" if field.admissible else "not admissible"
    run.say(
        f"construct: {verdict} (div {cert['div_max']:.3e}, normal {cert['normal_max']:.3e}, "
        f"tangential vorticity {cert['tangential_vorticity_max']:.3e})"
    )
    return EXIT_OK if field.admissible else EXIT_FAIL


def _scan(run: _Run, name: str):
    field = build_field(run.config)
    scan = run.config.scan
    report = criterion_scan(field, field.chart, scan["samples"], scan["seed"], run.config.tolerances())
    extra = {"certificate": field.certificate.to_dict(), "command": name}
    if run.wants("csv"):
        run.emit(f"{name}.csv", reports.scan_csv(report))
    if run.wants("json"):
        per = bool(run.config.output["per_sample"])
        run.emit(f"{name}.json", reports.scan_json(report, run.config.resolved(), per, extra))
    return report


def cmd_verify(run: _Run) -> int:
    report = _scan(run, "verify")
    tol = run.config.scan["tolerances"]["identity"]
    ok = report.passed(tol)
    run.say(f"verify: max deviation {report.max_deviation:.3e} (tol {tol:.1e}) {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_scan(run: _Run) -> int:
    report = _scan(run, "scan")
    # the verdict line is printed even with --quiet
    print(f"verdict: {report.verdict} (criterion holds at {report.fraction_criterion:.4f} of {len(report)} samples)")
    return EXIT_OK


COMMANDS = {"geometry": cmd_geometry, "construct": cmd_construct, "verify": cmd_verify, "scan": cmd_scan}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eulerslip", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "geometry": "curvature table over a parameter grid",
        "construct": "build the field and write its admissibility certificate",
        "verify": "check the boundary identity at sampled points",
        "scan": "scan the boundary for the persistence-failure criterion",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, type=Path, help="YAML run configuration")
        p.add_argument("--out", type=Path, default=None, help="output directory (overrides output.dir)")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        out = args.out if args.out is not None else Path(config.output["dir"])
        return COMMANDS[args.command](_Run(config, out, args.quiet))
    except ConfigError as exc:
        print(f"eulerslip: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PreconditionError as exc:
        print(f"eulerslip: precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (ConstructionError, GeometryError, ValueError) as exc:
        print(f"eulerslip: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
