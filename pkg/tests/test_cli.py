import json
import subprocess
import sys

import pytest
import yaml

from weylgerm.cli import run

HARMONIC = {
    "hamiltonian": {"kind": "harmonic", "mass": 1.0, "omega": 1.0},
    "packet": {"Z": [0.2, 0.9], "q0": 0.8, "p0": -0.3},
    "grid": {"half_width": 8.0, "N": 256},
    "t_span": [0.0, 2.0],
    "hbar": [0.2, 0.1],
}


def write(tmp_path, doc, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc))
    return str(path)


def test_star_output(capsys):
    assert run(["star", "q1", "p1"]) == 0
    assert capsys.readouterr().out.strip() == "q1*p1 + (1/2)*i*h"


def test_star_unit(capsys):
    assert run(["star", "1", "q1^2 + p1"]) == 0
    assert capsys.readouterr().out.strip() == "q1^2 + p1"


def test_star_malformed(capsys):
    assert run(["star", "q1", "q1 +"]) == 2
    assert "expr2" in capsys.readouterr().err


def test_unknown_command():
    assert run(["frobnicate"]) == 2


def test_missing_field(tmp_path, capsys):
    doc = json.loads(json.dumps(HARMONIC))
    del doc["hamiltonian"]["mass"]
    assert run(["propagate", "--config", write(tmp_path, doc), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "hamiltonian" in err and "mass" in err


def test_bad_grid(tmp_path):
    doc = dict(HARMONIC, grid={"half_width": 8.0, "N": 200})
    assert run(["propagate", "--config", write(tmp_path, doc), "--out", str(tmp_path)]) == 2


def test_missing_file(tmp_path):
    assert run(["propagate", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_propagate_harmonic(tmp_path):
    out = tmp_path / "out"
    assert run(["propagate", "--config", write(tmp_path, HARMONIC), "--out", str(out), "--tol", "1e-6"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["pass"] and summary["schema_version"] == 1
    assert max(r["l2_error_mod_phase"] for r in summary["results"]) <= 1e-6
    assert (out / "trajectory.csv").read_text().startswith("t,q,p,S,energy")
    assert (out / "packet_h0.csv").exists()


def test_check_failure_exit_code(tmp_path):
    doc = dict(HARMONIC, hamiltonian={"kind": "quartic", "mass": 1.0, "lambda": 1.0}, oracle_tol=1e-5)
    assert run(["propagate", "--config", write(tmp_path, doc), "--out", str(tmp_path), "--tol", "1e-12"]) == 3


def test_deterministic(tmp_path):
    cfg = write(tmp_path, {"hamiltonian": {"kind": "harmonic", "mass": 1.0, "omega": 1.0},
                           "grid": {"half_width": 8.0, "N": 256}, "t": 1.0, "hbar": [0.1],
                           "random_quadratic": 2})
    blobs = []
    for name in ("a", "b"):
        assert run(["compare-oracle", "--config", cfg, "--out", str(tmp_path / name), "--seed", "7"]) == 0
        blobs.append(((tmp_path / name / "compare.csv").read_bytes(), (tmp_path / name / "compare.json").read_bytes()))
    assert blobs[0] == blobs[1]


def test_quartic_monotone(tmp_path):
    doc = {"hamiltonian": {"kind": "quartic", "mass": 1.0, "lambda": 1.0},
           "packet": {"Z": [0.0, 1.0], "q0": 1.0, "p0": 0.0},
           "grid": {"half_width": 6.0, "N": 512}, "t_span": [0.0, 1.0], "hbar": [0.1, 0.05, 0.025]}
    assert run(["propagate", "--config", write(tmp_path, doc), "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "summary.json").read_text())["monotone_decreasing"]


def test_maslov(tmp_path):
    doc = {"hamiltonian": {"kind": "harmonic", "mass": 1.0, "omega": 1.0}, "t_span": [0.0, 6.283185307179586]}
    assert run(["maslov", "--config", write(tmp_path, doc), "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "maslov.json").read_text())["k"] == 2


def test_canonical_circle(tmp_path):
    doc = {"curve": {"kind": "circle", "radius": 1.3}}
    assert run(["canonical", "--config", write(tmp_path, doc), "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "canonical.json").read_text())["closed_index"] == 2


def test_diagrams_and_tree_check(tmp_path):
    assert run(["diagrams", "--config", write(tmp_path, {"N": 1, "L": 2}), "--out", str(tmp_path)]) == 0
    recs = json.loads((tmp_path / "diagrams.json").read_text())["diagrams"]
    assert sorted(r["M"] for r in recs) == [2]
    doc = {"mass": 1.0, "g": 0.5, "u0": 0.7, "v0": 0.1, "t": [1.0, 2.0]}
    assert run(["tree-check", "--config", write(tmp_path, doc, "t.yaml"), "--out", str(tmp_path), "--tol", "1e-9"]) == 0


def test_console_script(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "weylgerm.cli", "star", "q1", "q1"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "q1^2"
