import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from calfib.cli import main, ordered_map


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def records(text):
    return [json.loads(line) for line in text.splitlines()]


def test_verify_flat_passes(capsys):
    code, out, err = run(["verify", "--model", "flat", "--n", "2", "--seed", "7"], capsys)
    assert code == 0
    recs = records(out)
    assert recs and all(r["pass"] for r in recs)
    assert all({"check", "claim", "residual", "tol", "pass", "model", "seed"} <= r.keys() for r in recs)
    assert "wall time" in err


def test_verify_eguchi_hanson_has_ricci_line(capsys):
    code, out, _ = run(["verify", "--model", "eguchi-hanson", "--l", "1"], capsys)
    assert code == 0
    assert any("ricci" in r["check"].lower() for r in records(out))


def test_unknown_model_is_usage_error(capsys):
    assert run(["verify", "--model", "nope"], capsys)[0] == 2
    assert run(["frobnicate"], capsys)[0] == 2


def test_forced_failure_exits_one(capsys):
    code, out, _ = run(["verify", "--model", "flat", "--tol", "1e-30"], capsys)
    assert code == 1
    assert not all(r["pass"] for r in records(out))


def test_numerical_failure_exits_three(capsys):
    assert run(["flow", "--start", "0,0,0,0"], capsys)[0] == 3


def test_fiber_records(capsys):
    code, out, _ = run(["fiber", "--model", "flat", "--n", "2", "--level", "0,1", "--samples", "200"], capsys)
    assert code == 0
    recs = records(out)
    assert len(recs) == 200 and [r["index"] for r in recs] == list(range(200))
    assert max(max(r["lagrangian"], r["special"]) for r in recs) < 1e-7


def test_fiber_first_record_is_start(capsys):
    code, out, _ = run(["fiber", "--start", "0.3,0.2,-1,0.5", "--samples", "3"], capsys)
    assert code == 0
    assert np.allclose(records(out)[0]["coords"], [0.3, 0.2, -1, 0.5])


def test_fiber_on_singular_plane_is_well_formed(capsys):
    code, out, _ = run(["fiber", "--level", "0,0", "--samples", "20", "--seed", "3"], capsys)
    assert code in (0, 1)
    assert all("classification" in r or "error" in r for r in records(out))


def test_fiber_level_arity(capsys):
    assert run(["fiber", "--level", "1,2,3"], capsys)[0] == 2
    assert run(["fiber", "--level", "a,b"], capsys)[0] == 2


def test_cone(capsys):
    code, out, _ = run(["cone", "--model", "flat", "--n", "2"], capsys)
    assert code == 0 and records(out)[0]["count"] == 2


def test_flow(capsys):
    code, out, _ = run(["flow", "--level", "0.4,-0.3"], capsys)
    assert code == 0 and len(records(out)) == 21


def test_g2_package(capsys):
    code, out, _ = run(["g2", "package", "--trials", "200"], capsys)
    assert code == 0 and all(r["pass"] for r in records(out))


def test_minimal_orbit_cli(capsys):
    code, out, _ = run(["minimal-orbit", "--base", "cp1"], capsys)
    assert code == 0
    assert abs(records(out)[0]["b"][0] - 0.5) < 1e-6
    assert run(["minimal-orbit", "--base", "p2"], capsys)[0] == 2


def test_csv_format(capsys):
    code, out, _ = run(["verify", "--format", "csv"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and rows and "residual" in rows[0]


def test_out_file(tmp_path, capsys):
    path = tmp_path / "r.jsonl"
    code, out, _ = run(["verify", "--out", str(path)], capsys)
    assert code == 0 and out == "" and records(path.read_text())


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nmodel = eguchi-hanson\nseed = 4\nsamples = 5\n")
    _, out, _ = run(["verify", "--config", str(cfg)], capsys)
    assert records(out)[0]["seed"] == 4
    _, out2, _ = run(["verify", "--config", str(cfg), "--seed", "9"], capsys)
    assert records(out2)[0]["seed"] == 9
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = red\n")
    assert run(["verify", "--config", str(bad)], capsys)[0] == 2
    assert run(["verify", "--config", str(tmp_path / "missing.cfg")], capsys)[0] == 2


def test_ordered_map_keeps_order(monkeypatch):
    monkeypatch.setenv("CALFIB_THREADS", "4")
    assert ordered_map(lambda i: i * i, range(50)) == [i * i for i in range(50)]


def test_threaded_fiber_output_matches_serial(monkeypatch, capsys):
    argv = ["fiber", "--level", "0.5,0.5", "--samples", "16", "--seed", "2"]
    monkeypatch.setenv("CALFIB_THREADS", "1")
    _, serial, _ = run(argv, capsys)
    monkeypatch.setenv("CALFIB_THREADS", "4")
    _, threaded, _ = run(argv, capsys)
    assert serial == threaded


def test_byte_identical_reruns():
    cmd = [sys.executable, "-m", "calfib", "fiber", "--level", "0.2,0.7", "--samples", "10", "--seed", "5"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a and a == b
