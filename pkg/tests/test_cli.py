from __future__ import annotations

import csv
import json
import math

import pytest

from fkising.cli import EXIT_FAIL, EXIT_INPUT, EXIT_OK, main, read_config_file
from fkising.massive_walk import RateQuery, rate_function


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_verify_small_catalog(tmp_path, capsys):
    assert main(["verify", "--cap", "12", "--out", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "skipped rect_3x2" in out and "PASS check_vertex_relation" in out
    rep = json.loads((tmp_path / "check_vertex_relation.json").read_text())
    assert rep["max_abs_residual"] < 1e-10 and rep["count_checked"] > 0
    manifest = json.loads((tmp_path / "verify.manifest.json").read_text())
    assert manifest["command"] == "verify" and manifest["parameters"]["cap"] == 12
    assert main(["report", "--out", str(tmp_path)]) == EXIT_OK


def test_verify_fault_is_reported(tmp_path, capsys):
    assert main(["verify", "--cap", "12", "--out", str(tmp_path), "--inject-fault"]) == EXIT_FAIL
    assert "FAIL check_vertex_relation" in capsys.readouterr().out
    assert main(["report", "--out", str(tmp_path)]) == EXIT_FAIL


def test_rate_csv(tmp_path):
    assert main(["rate", "--beta", "0.4", "--direction", "1,0", "--direction", "1,1",
                 "--out", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "rate.csv")
    assert float(rows[0]["rate"]) == pytest.approx(0.167718345136753, abs=1e-13)
    assert float(rows[0]["neg_ln_lambda"]) == pytest.approx(float(rows[0]["rate"]), abs=1e-12)
    assert float(rows[1]["rate"]) == pytest.approx(rate_function(RateQuery(0.4, (1, 1))), rel=1e-15)
    assert rows[1]["neg_ln_lambda"] == ""


def test_rate_refusals(tmp_path, capsys):
    assert main(["rate", "--beta", "0.5", "--out", str(tmp_path)]) == EXIT_INPUT
    assert "subcritical" in capsys.readouterr().err
    assert main(["rate", "--p", "0.3", "--beta", "0.3", "--out", str(tmp_path)]) == EXIT_INPUT
    assert main(["rate", "--beta", "0.3", "--direction", "0,0", "--out", str(tmp_path)]) == EXIT_INPUT


def test_config_file_and_override(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# rate run\nbeta = 0.3\ndirection = 1,0; 0,2\nformat = json\n")
    assert read_config_file(conf)["beta"] == "0.3"
    out = tmp_path / "a"
    assert main(["rate", "--config", str(conf), "--out", str(out)]) == EXIT_OK
    rows = json.loads((out / "rate.json").read_text())
    assert [r["a2"] for r in rows] == [0, 2]
    assert rows[0]["beta"] == 0.3
    out = tmp_path / "b"
    assert main(["rate", "--config", str(conf), "--beta", "0.2", "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "rate.json").read_text())[0]["beta"] == 0.2
    bad = tmp_path / "bad.conf"
    bad.write_text("nonsense = 1\n")
    assert main(["rate", "--config", str(bad), "--out", str(out)]) == EXIT_INPUT


def test_green_refuses_small_radius(tmp_path, capsys):
    assert main(["green", "--mass", "0.5", "--radius", "10", "--tol", "1e-12",
                 "--out", str(tmp_path)]) == EXIT_INPUT
    assert "radius" in capsys.readouterr().err


def test_green_small_run(tmp_path):
    assert main(["green", "--mass", "0.5", "--radius", "60", "--nmax", "20",
                 "--field-radius", "3", "--out", str(tmp_path)]) == EXIT_OK
    files = {f.name for f in tmp_path.iterdir()}
    assert "green_field.csv" in files and "green.manifest.json" in files


def test_sample_deterministic(tmp_path):
    args = ["sample", "--p", "0.4", "--box", "16", "--samples", "1000", "--burn-in", "50",
            "--separations", "2-5", "--seed", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
    a, b = _rows(tmp_path / "a" / "estimates.csv"), _rows(tmp_path / "b" / "estimates.csv")
    assert a == b and len(a) == 4
    fits = _rows(tmp_path / "a" / "fit.csv")
    assert {float(f["prefactor_power"]) for f in fits} == {0.0, 0.5}
    manifest = json.loads((tmp_path / "a" / "sample.manifest.json").read_text())
    assert manifest["resolved"]["seed"] == 3 and manifest["resolved"]["separations"] == [2, 3, 4, 5]


def test_sample_supercritical_skips_fit(tmp_path, capsys):
    assert main(["sample", "--p", "0.7", "--box", "12", "--samples", "200", "--burn-in", "20",
                 "--separations", "1-3", "--seed", "1", "--out", str(tmp_path)]) == EXIT_OK
    assert "no exponential decay" in capsys.readouterr().err
    assert not (tmp_path / "fit.csv").exists()


def test_sample_box_too_small(tmp_path):
    assert main(["sample", "--p", "0.4", "--box", "8", "--samples", "10", "--separations", "5",
                 "--out", str(tmp_path)]) == EXIT_INPUT


def test_strip_needs_three_widths(tmp_path):
    assert main(["strip", "--p", "0.3", "--height", "2", "--halfwidths", "1,2",
                 "--out", str(tmp_path)]) == EXIT_INPUT


@pytest.mark.slow
def test_strip_exact(tmp_path):
    assert main(["strip", "--p", "0.3", "--height", "2", "--halfwidths", "1,2,3", "--cap", "26",
                 "--out", str(tmp_path)]) == EXIT_OK
    assert any(f.name.startswith("strip") and f.suffix == ".csv" for f in tmp_path.iterdir())


def test_report_needs_reports(tmp_path):
    assert main(["report", "--out", str(tmp_path)]) == EXIT_INPUT


def test_unknown_subcommand():
    assert main(["frobnicate"]) == EXIT_INPUT
    assert math.isfinite(EXIT_OK)
