import csv
import json
import math

import pytest

from kbalayage import c_k, Medium
from kbalayage.cli import run
from kbalayage.io import read_field, read_mask_pgm

BASE = {"medium": {"N": 2, "k": 1.0}, "grid_h": 0.1}


def _scenario(tmp_path, extra, name="scenario.json", text=None):
    path = tmp_path / name
    path.write_text(text if text is not None else json.dumps({**BASE, **extra}, indent=2))
    return path


def _run(tmp_path, command, scenario, *flags, out="out"):
    return run([command, "--scenario", str(scenario), "--out", str(tmp_path / out), *flags])


def test_sweep_outputs(tmp_path):
    c = float(c_k(Medium(2, 1.0), 1.0))
    sc = _scenario(tmp_path, {"measure": {"atoms": [{"point": [0, 0], "mass": c}]}})
    assert _run(tmp_path, "sweep", sc) == 0
    out = tmp_path / "out"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["feasible"]
    omega = read_mask_pgm(out / "omega.pgm")
    r = math.sqrt(omega.count * omega.spec.cell_volume / math.pi)
    assert abs(r - 1.0) <= 2 * 0.1
    assert read_field(out / "V.bin").spec == omega.spec
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "sweep" and "omega.pgm" in json.dumps(manifest)


def test_sweep_infeasible_exit_code(tmp_path):
    sc = _scenario(tmp_path, {"measure": {"atoms": [{"point": [0, 0], "mass": 9.0}]}})
    assert _run(tmp_path, "sweep", sc) == 2
    assert not (tmp_path / "out" / "omega.pgm").exists()


def test_sweep_deterministic(tmp_path):
    sc = _scenario(tmp_path, {"measure": {"balls": [{"center": [0.1, 0], "radius": 0.5, "density": 3.0}]}})
    assert _run(tmp_path, "sweep", sc, out="a") == 0
    assert _run(tmp_path, "sweep", sc, out="b") == 0
    for name in ("V.bin", "u.bin", "omega.pgm", "manifest.json", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_schema_error_is_line_precise(tmp_path, capsys):
    text = '{\n  "medium": {"N": 2, "k": 1.0},\n  "measure": {"atoms": [\n    {"point": [0, 0], "mass": -1}\n  ]}\n}\n'
    sc = _scenario(tmp_path, None, name="bad.json", text=text)
    assert _run(tmp_path, "sweep", sc) == 1
    err = capsys.readouterr().err
    assert "bad.json:4:" in err and "measure/atoms/0/mass" in err


def test_malformed_json(tmp_path, capsys):
    sc = _scenario(tmp_path, None, text='{\n  "medium": {"N": 2,, "k": 1}\n}')
    assert _run(tmp_path, "sweep", sc) == 1
    assert ":2:" in capsys.readouterr().err


def test_grid_cap(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("HB_MAX_CELLS", "100")
    sc = _scenario(tmp_path, {"measure": {"atoms": [{"point": [0, 0], "mass": 2.0}]}})
    assert _run(tmp_path, "sweep", sc) == 1
    assert "HB_MAX_CELLS" in capsys.readouterr().err


def test_radial_table(tmp_path):
    sc = _scenario(
        tmp_path,
        {"radial_table": {"media": [{"N": 3, "k": 1.0}, {"N": 2, "k": 1.0}], "radii": [1.0], "masses": [5.0, 100.0]}},
    )
    assert _run(tmp_path, "radial-table", sc) == 0
    rows = list(csv.DictReader((tmp_path / "out" / "radial_table.csv").open()))
    rk = {r["medium"]: float(r["value"]) for r in rows if r["quantity"] == "R_k"}
    assert rk["N=3;k=1.0"] == pytest.approx(math.pi, abs=1e-10)
    assert rk["N=2;k=1.0"] == pytest.approx(2.4048255577, abs=1e-8)
    pm = [r["value"] for r in rows if r["quantity"] == "point_mass_radius"]
    assert pm.count("infeasible") == 2 and len(pm) == 4


def test_verify(tmp_path):
    c = float(c_k(Medium(2, 1.0), 1.0))
    sc = _scenario(tmp_path, {"measure": {"atoms": [{"point": [0, 0], "mass": c}]}, "verify": {"exterior_samples": 40}})
    assert _run(tmp_path, "verify", sc) == 0
    rep = json.loads((tmp_path / "out" / "quadrature_report.json").read_text())
    assert rep["passed"] and rep["samples"] == 40


def test_verify_with_wrong_mask_fails(tmp_path):
    c = float(c_k(Medium(2, 1.0), 1.0))
    sc = _scenario(tmp_path, {"measure": {"atoms": [{"point": [0, 0], "mass": c}]}})
    assert _run(tmp_path, "sweep", sc, out="sw") == 0
    sc2 = _scenario(
        tmp_path,
        {"measure": {"atoms": [{"point": [1.5, 0], "mass": c}]}, "verify": {"omega_mask": "sw/omega.pgm"}},
        name="v.json",
    )
    assert _run(tmp_path, "verify", sc2) == 2
    assert json.loads((tmp_path / "out" / "quadrature_report.json").read_text())["rejected"]


def test_lambda1(tmp_path):
    sc = _scenario(tmp_path, {"lambda1": {"boxes": [{"lower": [0, 0], "upper": [1, 1]}]}}, )
    assert _run(tmp_path, "lambda1", sc, "--grid-h", "0.02") == 0
    data = json.loads((tmp_path / "out" / "lambda1.json").read_text())
    assert data["lambda1"] == pytest.approx(2 * math.pi**2, rel=0.01)
    assert data["at_least_k2"]


def test_heleshaw(tmp_path):
    sc = _scenario(
        tmp_path,
        {
            "box": {"center": [0, 0], "half_width": 3.2},
            "heleshaw": {
                "initial_domain": {"balls": [{"center": [0, 0], "radius": 0.5}]},
                "source": [0, 0],
                "times": [1.0, 4.0, 8.0],
                "bracket_resolution": 0.25,
                "law": [{"t": 1.0, "eps": 0.5}],
            },
        },
    )
    assert _run(tmp_path, "heleshaw", sc) == 0
    ev = json.loads((tmp_path / "out" / "evolution.json").read_text())
    lo, hi = ev["T_bracket"]
    assert hi - lo <= 0.25 and lo <= 7.25 and hi >= 6.9
    assert (tmp_path / "out" / "omega_000.pgm").exists()
    assert not (tmp_path / "out" / "omega_002.pgm").exists()
    assert ev["law"][0]["within_layer"]


def test_missing_block(tmp_path, capsys):
    sc = _scenario(tmp_path, {})
    assert _run(tmp_path, "heleshaw", sc) == 1
    assert "heleshaw" in capsys.readouterr().err


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["--version"])
    assert exc.value.code == 0
    assert "0.1.0" in capsys.readouterr().out
