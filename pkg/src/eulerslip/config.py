"""Run configuration: a YAML document with four blocks.

    chart:   kind + parameters
    field:   family (ball | rigid_rotation | stream | slab) + its parameters
    scan:    samples, seed, certificate_samples, grid, tolerances
    output:  dir, formats, per_sample

Unknown keys are rejected.  Errors carry the dotted key path and, when the
key exists in the file, its line number.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import yaml

from .construct import BetaSpec
from .geometry import GeometryError, SurfaceChart, cylinder, revolution, slab, sphere, spheroid, torus
from .persistence import Tolerances


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = "", line: int | None = None):
        self.path = path
        self.line = line
        where = path or "<root>"
        if line is not None:
            where += f" (line {line})"
        super().__init__(f"config error at {where}: {message}")


CHART_KEYS = {
    "sphere": {"R": 1.0},
    "spheroid": {"a_eq": None, "c_pol": None},
    "torus": {"R_major": None, "r_minor": None},
    "cylinder": {"R": None, "length": None},
    "slab": {"length": 6.283185307179586, "depth": 1.0},
    "revolution": {"r": None, "z": None, "t_range": None, "periodic": False},
}
FIELD_KEYS = {
    "ball": {"g": "2 - rho**2"},
    "rigid_rotation": {},
    "stream": {"beta": None, "cutoff_width": None},
    "slab": {"modes": [1, 1], "amplitude": 1.0, "cutoff_width": None},
}
BETA_KEYS = {"basis", "coefficients", "bumps", "expr"}
SCAN_DEFAULTS = {
    "samples": 10_000,
    "seed": 0,
    "certificate_samples": 10_000,
    "grid": [33, 8],
    "tolerances": {"identity": 1e-8, "sigma": 1e-8, "lambda": 1e-6, "criterion": 1e-6, "margin_factor": 10.0},
}
OUTPUT_DEFAULTS = {"dir": "out", "formats": ["json", "csv"], "per_sample": False}


def _line_map(text: str) -> dict[str, int]:
    lines: dict[str, int] = {}

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                path = f"{prefix}.{key.value}" if prefix else str(key.value)
                lines[path] = key.start_mark.line + 1
                walk(value, path)

    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines
    if root is not None:
        walk(root, "")
    return lines


@dataclass
class RunConfig:
    chart: dict
    field: dict
    scan: dict
    output: dict
    lines: dict

    def resolved(self) -> dict:
        return {"chart": self.chart, "field": self.field, "scan": self.scan, "output": self.output}

    def error(self, message: str, path: str) -> ConfigError:
        return ConfigError(message, path, self.lines.get(path))

    # builders -------------------------------------------------------------
    def build_chart(self) -> SurfaceChart:
        c = dict(self.chart)
        kind = c.pop("kind")
        try:
            if kind == "sphere":
                return sphere(c["R"])
            if kind == "spheroid":
                return spheroid(c["a_eq"], c["c_pol"])
            if kind == "torus":
                return torus(c["R_major"], c["r_minor"])
            if kind == "cylinder":
                return cylinder(c["R"], c["length"])
            if kind == "slab":
                return slab(c["length"], c["depth"])
            return revolution(c["r"], c["z"], c["t_range"], c["periodic"])
        except (GeometryError, ValueError) as exc:
            raise self.error(str(exc), "chart") from None

    def beta_spec(self) -> BetaSpec:
        b = self.field["beta"]
        return BetaSpec(
            basis=b["basis"],
            coefficients=tuple(b.get("coefficients", ())),
            bumps=tuple(tuple(x) for x in b.get("bumps", ())),
            expr=b.get("expr"),
        )

    def tolerances(self) -> Tolerances:
        t = self.scan["tolerances"]
        return Tolerances(t["identity"], t["sigma"], t["lambda"], t["criterion"], t["margin_factor"])


def _merge(block: dict, defaults: dict, path: str, lines: dict) -> dict:
    unknown = set(block) - set(defaults)
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key {key!r}", f"{path}.{key}", lines.get(f"{path}.{key}"))
    out = copy.deepcopy(defaults)
    for k, v in block.items():
        out[k] = v
    for k, v in out.items():
        if v is None:
            raise ConfigError("missing required key", f"{path}.{k}", lines.get(path))
    return out


def _positive_number(value, path, lines, integer=False):
    ok = isinstance(value, (int, float)) and not isinstance(value, bool) and value > 0
    if integer:
        ok = ok and float(value).is_integer()
    if not ok:
        kind = "a positive integer" if integer else "a positive number"
        raise ConfigError(f"must be {kind}, got {value!r}", path, lines.get(path))


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"cannot parse {source}: {getattr(exc, 'problem', exc)}", "", line) from None
    lines = _line_map(text)
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping")
    unknown = set(data) - {"chart", "field", "scan", "output"}
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key {key!r}", key, lines.get(key))
    for block in ("chart", "field"):
        if not isinstance(data.get(block), dict):
            raise ConfigError("required mapping block", block, lines.get(block))

    chart = data["chart"]
    kind = chart.get("kind")
    if kind not in CHART_KEYS:
        raise ConfigError(f"unknown chart kind {kind!r}; expected one of {sorted(CHART_KEYS)}", "chart.kind", lines.get("chart.kind"))
    chart_block = {"kind": kind, **_merge({k: v for k, v in chart.items() if k != "kind"}, CHART_KEYS[kind], "chart", lines)}

    fld = data["field"]
    family = fld.get("family")
    if family not in FIELD_KEYS:
        raise ConfigError(f"unknown field family {family!r}; expected one of {sorted(FIELD_KEYS)}", "field.family", lines.get("field.family"))
    field_defaults = dict(FIELD_KEYS[family])
    optional = {k for k in ("cutoff_width",) if k in field_defaults}
    merged = _merge({k: v for k, v in fld.items() if k != "family"}, {k: (0 if k in optional else v) for k, v in field_defaults.items()}, "field", lines)
    for k in optional:
        if k not in fld:
            merged[k] = None
        else:
            _positive_number(fld[k], f"field.{k}", lines)
    field_block = {"family": family, **merged}
    if family == "stream":
        beta = field_block["beta"]
        if not isinstance(beta, dict):
            raise ConfigError("beta must be a mapping", "field.beta", lines.get("field.beta"))
        unknown = set(beta) - BETA_KEYS
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(f"unknown key {key!r}", f"field.beta.{key}", lines.get(f"field.beta.{key}"))
        if beta.get("basis") not in ("legendre", "fourier", "bump", "expr"):
            raise ConfigError(f"unknown beta basis {beta.get('basis')!r}", "field.beta.basis", lines.get("field.beta.basis"))
    if family in ("ball", "rigid_rotation") and kind != "sphere":
        raise ConfigError(f"field family {family!r} lives on the ball; chart kind must be 'sphere'", "chart.kind", lines.get("chart.kind"))
    if family == "slab" and kind != "slab":
        raise ConfigError("field family 'slab' needs chart kind 'slab'", "chart.kind", lines.get("chart.kind"))

    scan_in = data.get("scan") or {}
    if not isinstance(scan_in, dict):
        raise ConfigError("must be a mapping", "scan", lines.get("scan"))
    tol_in = scan_in.get("tolerances") or {}
    scan_block = _merge({k: v for k, v in scan_in.items() if k != "tolerances"}, {k: v for k, v in SCAN_DEFAULTS.items() if k != "tolerances"}, "scan", lines)
    scan_block["tolerances"] = _merge(tol_in, SCAN_DEFAULTS["tolerances"], "scan.tolerances", lines)
    for key in ("samples", "certificate_samples"):
        _positive_number(scan_block[key], f"scan.{key}", lines, integer=True)
        scan_block[key] = int(scan_block[key])
    if not (isinstance(scan_block["seed"], int) and not isinstance(scan_block["seed"], bool) and scan_block["seed"] >= 0):
        raise ConfigError("seed must be a non-negative integer", "scan.seed", lines.get("scan.seed"))
    grid = scan_block["grid"]
    if not (isinstance(grid, list) and len(grid) == 2):
        raise ConfigError("grid must be [n_xi1, n_xi2]", "scan.grid", lines.get("scan.grid"))
    for g in grid:
        _positive_number(g, "scan.grid", lines, integer=True)
    for key, value in scan_block["tolerances"].items():
        _positive_number(value, f"scan.tolerances.{key}", lines)

    out_in = data.get("output") or {}
    if not isinstance(out_in, dict):
        raise ConfigError("must be a mapping", "output", lines.get("output"))
    output_block = _merge(out_in, OUTPUT_DEFAULTS, "output", lines)
    formats = output_block["formats"]
    if not (isinstance(formats, list) and formats and set(formats) <= {"json", "csv"}):
        raise ConfigError("formats must be a non-empty subset of [json, csv]", "output.formats", lines.get("output.formats"))

    return RunConfig(chart_block, field_block, scan_block, output_block, lines)


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc.strerror}") from None
    return parse_config(text, str(p))
