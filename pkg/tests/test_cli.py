import csv
import json
import math

import pytest

from eulerslip import __version__
from eulerslip.cli import main
from eulerslip.config import ConfigError, parse_config
from eulerslip.reports import GEOMETRY_COLUMNS, SCAN_COLUMNS, SCAN_SCHEMA

BALL = """\
chart: {kind: sphere, R: 1.0}
field: {family: ball, g: "2 - rho**2"}
scan: {samples: 1500, seed: 4, certificate_samples: 1000}
"""


def run(tmp_path, text, command, *extra):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(text)
    out = tmp_path / "out"
    return main([command, "--config", str(cfg), "--out", str(out), *extra]), out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_geometry_sphere_rows(tmp_path):
    code, out = run(tmp_path, "chart: {kind: sphere}\nfield: {family: ball}\nscan: {grid: [9, 4]}\n", "geometry", "--quiet")
    assert code == 0
    rows = read_csv(out / "geometry.csv")
    assert len(rows) == 36
    assert list(rows[0]) == list(GEOMETRY_COLUMNS)
    assert all(abs(float(r["kappa1"]) - 1) < 1e-12 and r["in_sigma"] == "true" for r in rows)
    meta = json.loads((out / "geometry.json").read_text())
    assert meta["version"] == __version__ and meta["config"]["chart"]["kind"] == "sphere"


def test_geometry_torus_gaussian_changes_sign_across_top_circle(tmp_path):
    text = "chart: {kind: torus, R_major: 3, r_minor: 1}\nfield: {family: stream, beta: {basis: fourier, coefficients: [0, 1]}}\nscan: {grid: [64, 1]}\n"
    code, out = run(tmp_path, text, "geometry", "--quiet")
    assert code == 0
    rows = read_csv(out / "geometry.csv")
    gauss = {round(float(r["xi1"]), 9): float(r["gaussian"]) for r in rows}
    step = 2 * math.pi / 64
    after, before = gauss[round(step, 9)], gauss[round(2 * math.pi - step, 9)]
    assert after > 0 > before
    assert gauss[0.0] == pytest.approx(0.0, abs=1e-15)
    top = [r for r in rows if float(r["xi1"]) == 0.0]
    assert top[0]["in_sigma"] == "false"


def test_construct_exit_codes(tmp_path, capsys):
    code, out = run(tmp_path, BALL, "construct")
    assert code == 0
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["certificate"]["admissible"] is True
    assert cert["config"]["scan"]["seed"] == 4
    assert "admissible" in capsys.readouterr().out

    code, out = run(tmp_path, "chart: {kind: sphere}\nfield: {family: rigid_rotation}\n", "construct", "--quiet")
    assert code == 1
    cert = json.loads((out / "certificate.json").read_text())["certificate"]
    assert cert["tangential_vorticity_max"] == pytest.approx(2.0, abs=1e-6)

    text = "chart: {kind: sphere}\nfield: {family: stream, beta: {basis: legendre, coefficients: [1.0]}}\n"
    assert run(tmp_path, text, "construct", "--quiet")[0] == 2
    assert "vanishes" in capsys.readouterr().err


def test_verify_pass_and_unreachable_tolerance(tmp_path):
    code, out = run(tmp_path, BALL, "verify", "--quiet")
    assert code == 0
    summary = json.loads((out / "verify.json").read_text())["summary"]
    assert summary["max_deviation"] <= 1e-9
    strict = BALL.replace("certificate_samples: 1000}", "certificate_samples: 1000, tolerances: {identity: 1.0e-15}}")
    assert run(tmp_path, strict, "verify", "--quiet")[0] == 1


def test_scan_verdicts(tmp_path, capsys):
    code, out = run(tmp_path, BALL, "scan", "--quiet")
    assert code == 0
    assert "verdict: persistence_fails" in capsys.readouterr().out
    doc = json.loads((out / "scan.json").read_text())
    assert doc["schema"] == SCAN_SCHEMA and doc["csv_columns"] == list(SCAN_COLUMNS)
    rows = read_csv(out / "scan.csv")
    assert len(rows) == 1500 and list(rows[0]) == list(SCAN_COLUMNS)

    code, _ = run(tmp_path, "chart: {kind: slab}\nfield: {family: slab}\nscan: {samples: 300}\n", "scan")
    assert code == 0
    assert "verdict: inconclusive" in capsys.readouterr().out


def test_scan_precondition_exit(tmp_path, capsys):
    code, _ = run(tmp_path, "chart: {kind: sphere}\nfield: {family: rigid_rotation}\nscan: {samples: 10}\n", "scan")
    assert code == 3
    assert "not admissible" in capsys.readouterr().err


def test_scan_is_reproducible(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    a.mkdir()
    b.mkdir()
    outs = []
    for d in (a, b):
        code, out = run(d, BALL, "scan", "--quiet")
        assert code == 0
        outs.append(out)
    for name in ("scan.csv", "scan.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_per_sample_json_and_formats(tmp_path):
    text = BALL + "output: {per_sample: true, formats: [json]}\n"
    code, out = run(tmp_path, text, "scan", "--quiet")
    assert code == 0
    doc = json.loads((out / "scan.json").read_text())
    assert len(doc["samples"]["deviation"]) == 1500
    assert not (out / "scan.csv").exists()


@pytest.mark.parametrize(
    "text, path, line",
    [
        ("chart:\n  kind: sphere\n  radius: 2\nfield: {family: ball}\n", "chart.radius", 3),
        ("chart: {kind: cube}\nfield: {family: ball}\n", "chart.kind", 1),
        ("chart: {kind: sphere}\nfield: {family: ball}\nscan:\n  samples: 0\n", "scan.samples", 4),
        ("chart: {kind: sphere}\nfield: {family: ball}\nscan:\n  tolerances:\n    identity: -1\n", "scan.tolerances.identity", 5),
        ("chart: {kind: sphere}\nfield: {family: ball}\nextra: 1\n", "extra", 3),
        ("chart: {kind: torus, R_major: 3, r_minor: 1}\nfield: {family: ball}\n", "chart.kind", 1),
        ("chart: {kind: spheroid, a_eq: 1}\nfield: {family: ball}\n", "chart.c_pol", 1),
        ("chart: {kind: sphere}\nfield:\n  family: stream\n  beta: {basis: legendre, degree: 2}\n", "field.beta.degree", 4),
    ],
)
def test_config_errors_carry_path_and_line(text, path, line):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.path == path
    assert err.value.line == line
    assert path in str(err.value)


def test_config_error_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, "chart: {kind: cube}\nfield: {family: ball}\n", "geometry")
    assert code == 2
    assert "chart.kind" in capsys.readouterr().err
    assert main(["scan", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert run(tmp_path, "chart: [1, 2\n", "scan")[0] == 2


def test_resolved_config_fills_defaults():
    cfg = parse_config("chart: {kind: sphere}\nfield: {family: ball}\n")
    r = cfg.resolved()
    assert r["chart"]["R"] == 1.0
    assert r["scan"]["samples"] == 10_000 and r["scan"]["tolerances"]["identity"] == 1e-8
    assert r["output"]["formats"] == ["json", "csv"]
