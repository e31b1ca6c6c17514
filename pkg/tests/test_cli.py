import csv
import io
import json
import math
import subprocess
import sys

import pytest

from winding_lab.cli import main, parse_sweep


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(text):
    lines = text.splitlines()
    assert lines[0].startswith("# schema: winding_lab.")
    body = [l for l in lines[1:] if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def test_parse_sweep_inclusive():
    assert parse_sweep("0:1:0.25") == pytest.approx([0, 0.25, 0.5, 0.75, 1.0])
    with pytest.raises(Exception):
        parse_sweep("0:1")


def test_winding_csv(capsys):
    code, out, err = run(["winding", "--n", "3", "--T", "1", "--mu", "0.5"], capsys)
    assert code == 0
    assert out.splitlines()[0] == "# schema: winding_lab.winding.v1"
    rows = read_csv(out)
    assert sum(float(r["probability"]) for r in rows) == pytest.approx(1, abs=1e-8)
    manifest = json.loads(err.strip().splitlines()[-1])
    assert manifest["parameters"]["n"] == 3


def test_winding_sweep_json(capsys):
    code, out, _ = run(["winding", "--n", "2", "--sweep", "0:1:0.5", "--format", "json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == "winding_lab.winding.v1"
    assert sorted({r["mu"] for r in doc["rows"]}) == [0.0, 0.5, 1.0]


def test_output_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["simulate", "--n", "2", "--T", "4", "--samples", "300", "--lattice-size", "16",
                     "--seed", "7", "--out", str(p)]) == 0
    assert a.read_text() == b.read_text()
    manifest = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["diagnostics"][0]["config"]["lattice_size"] == 16


def test_simulate_columns(capsys):
    code, out, _ = run(["simulate", "--n", "1", "--samples", "200", "--lattice-size", "16"], capsys)
    rows = read_csv(out)
    assert code == 0
    assert {"omega", "count", "frequency", "wilson_half_width", "exact_discrete"} <= set(rows[0])
    assert sum(int(r["count"]) for r in rows) == 200


def test_breakdown_exit_code(capsys):
    code, out, err = run(["compare-norms", "--n", "300", "--mu", "2.5"], capsys)
    assert code == 4
    assert out.splitlines()[-1].startswith("# error: Breakdown")


def test_regime_exit_codes(capsys):
    assert run(["sigchart", "--T", "12"], capsys)[0] == 3
    assert run(["density", "--n", "2", "--t", "1.5"], capsys)[0] == 3
    assert run(["poly-compare", "--n", "8", "--mu", "0.5", "--z", "2.02+0.5j"], capsys)[0] == 3


def test_convergence_exit_code(capsys):
    code, out, _ = run(["simulate", "--n", "4", "--T", "1", "--samples", "50", "--lattice-size", "16",
                        "--method", "rejection", "--budget", "20"], capsys)
    assert code == 2
    assert out.splitlines()[-1].startswith("# error: RejectionBudgetExceeded")


def test_compare_norms_and_poly_compare(capsys):
    code, out, _ = run(["compare-norms", "--n", "16,32", "--mu", "1.0"], capsys)
    rows = read_csv(out)
    assert code == 0 and [r["regime"] for r in rows] == ["subcritical"] * 2
    assert float(rows[1]["err_sub"]) < float(rows[0]["err_sub"])
    assert math.isnan(float(rows[0]["err_herm"]))
    code, out, _ = run(["poly-compare", "--n", "16", "--mu", "0.5", "--format", "json"], capsys)
    doc = json.loads(out)
    assert abs(doc["rows"][0]["ratio_re"] - 1) < 0.01


def test_sigchart_markers(capsys):
    code, out, _ = run(["sigchart", "--T", "1", "--mu", "2.4", "--grid", "21"], capsys)
    rows = read_csv(out)
    kinds = [r["kind"] for r in rows]
    assert code == 0 and kinds.count("grid") == 441
    assert {"a", "b", "z_tilde_c", "minus_i_delta"} <= set(kinds)


def test_density_mass(capsys):
    code, out, err = run(["density", "--n", "4", "--t", "0.5", "--grid", "256"], capsys)
    assert code == 0
    rows = read_csv(out)
    mass = sum(float(r["density"]) for r in rows) * 2 * math.pi / 256
    assert mass == pytest.approx(4, abs=1e-6)


def test_precision_flag(capsys):
    _, a, _ = run(["winding", "--n", "2", "--mu", "1.0"], capsys)
    _, b, _ = run(["winding", "--n", "2", "--mu", "1.0", "--precision", "dd"], capsys)
    pa = {r["omega"]: float(r["probability"]) for r in read_csv(a)}
    pb = {r["omega"]: float(r["probability"]) for r in read_csv(b)}
    assert pa["0"] == pytest.approx(pb["0"], abs=1e-12)


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "winding_lab", "winding", "--n", "1"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("# schema: winding_lab.winding.v1")
