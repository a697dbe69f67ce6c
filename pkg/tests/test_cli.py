import csv
import json
from pathlib import Path

import numpy as np
import pytest

from monotrend.cli import main, read_series

DATA = Path(__file__).resolve().parents[1] / "src" / "monotrend" / "data" / "anomalies_like.csv"


def rows(path):
    with open(path) as fh:
        return list(csv.reader(line for line in fh if not line.startswith("#")))


def test_read_series_header_and_columns(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("# note\r\nyear,x,y\r\n2000,1,3\r\n2001,2,1\r\n")
    labels, y = read_series(f)
    assert labels == ["2000", "2001"] and y.tolist() == [3.0, 1.0]
    assert read_series(f, "x")[1].tolist() == [1.0, 2.0]
    assert read_series(f, "1")[1].tolist() == [1.0, 2.0]
    g = tmp_path / "b.csv"
    g.write_text("1\n3\n2\n")
    labels, y = read_series(g)
    assert labels == ["1", "2", "3"] and y.tolist() == [1.0, 3.0, 2.0]


def test_fit_three_rows(tmp_path):
    f = tmp_path / "s.csv"
    f.write_text("1\n3\n2\n")
    assert main(["fit", str(f), "--out-dir", str(tmp_path / "o"), "--max-lag", "1"]) == 0
    fit = rows(tmp_path / "o" / "fit.csv")
    assert fit[0] == ["label", "value", "fit", "residual"]
    assert [float(r[2]) for r in fit[1:]] == [1.0, 2.5, 2.5]
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["levels"] == [1.0, 2.5] and summary["n"] == 3
    assert summary["provenance"]["tool"] == "monotrend"


def test_fit_monotone_input_is_fixed_point(tmp_path):
    f = tmp_path / "m.csv"
    f.write_text("t,v\n1,0.5\n2,1.25\n3,2\n4,2.75\n")
    assert main(["fit", str(f), "--out-dir", str(tmp_path), "--format", "json", "--max-lag", "1"]) == 0
    out = json.loads((tmp_path / "fit.json").read_text())
    assert [r["fit"] for r in out["fit"]] == [0.5, 1.25, 2.0, 2.75]
    # residuals are all zero: no correlogram, but the fit still succeeds
    assert out["acf"] == []


def test_fit_bundled_data(tmp_path):
    assert main(["fit", str(DATA), "--out-dir", str(tmp_path)]) == 0
    fit = rows(tmp_path / "fit.csv")
    assert len(fit) == 152 and fit[1][0] == "1850" and fit[-1][0] == "2000"
    values = np.array([float(r[2]) for r in fit[1:]])
    assert np.all(np.diff(values) >= 0)
    # repr floats round-trip exactly
    assert all(repr(float(r[2])) == r[2] for r in fit[1:])
    acf = rows(tmp_path / "acf.csv")
    assert len(acf) == 1 + 151 // 4 + 1
    steps = rows(tmp_path / "steps.csv")
    assert steps[0] == ["t", "level"] and float(steps[-1][0]) == 1.0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["m"] == 151 - 6
    assert summary["penalized_last"] <= summary["isotonic_last"]


def test_fit_rejects_non_numeric(tmp_path, capsys):
    f = tmp_path / "bad.csv"
    f.write_text("v\n1\nabc\n2\n")
    assert main(["fit", str(f), "--out-dir", str(tmp_path)]) == 1
    assert "row 3" in capsys.readouterr().err


def test_missing_file_is_io_error(tmp_path):
    assert main(["fit", str(tmp_path / "nope.csv")]) == 2


def test_acf_command(tmp_path):
    out = tmp_path / "acf.csv"
    assert main(["acf", str(DATA), "--residuals", "--max-lag", "5", "--out", str(out)]) == 0
    r = rows(out)
    assert r[0] == ["lag", "acf"] and len(r) == 7 and float(r[1][1]) == 1.0


def test_simulate_roundtrip(tmp_path):
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--n", "20", "--rho", "0.9", "--phi", "square", "--seed", "4", "--out", str(out)]) == 0
    first = out.read_text()
    assert first.startswith("# monotrend ") and "seed=4" in first.splitlines()[0]
    assert main(["simulate", "--n", "20", "--rho", "0.9", "--phi", "square", "--seed", "4", "--out", str(out)]) == 0
    assert out.read_text() == first
    assert read_series(out)[1].size == 20
    assert main(["simulate", "--rho", "1.0", "--out", str(out)]) == 1


def test_limits_cache(tmp_path, capsys):
    args = ["limits", "chernoff", "--reps", "300", "--step", "0.01", "--cache-dir", str(tmp_path)]
    assert main(args + ["--out", str(tmp_path / "q.json")]) == 0
    assert "computed" in capsys.readouterr().err
    assert main(args) == 0
    captured = capsys.readouterr()
    assert "cache hit" in captured.err
    table = json.loads(captured.out)
    assert table["provenance"]["reps"] == 300
    assert main(args + ["--fresh"]) == 0
    assert "computed" in capsys.readouterr().err


def test_limits_boundary_and_penalized(tmp_path, capsys):
    base = ["--reps", "200", "--step", "0.01", "--cache-dir", str(tmp_path)]
    assert main(["limits", "boundary", "--ell", "1", "--sigma", "0.433", "--phi1-prime", "1", *base]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["provenance"]["law"] == "boundary" and len(out["cdf"]) == 11
    assert main(["limits", "penalized", "--alpha", "1", "--sigma", "0.25", "--phi1-prime", "1", *base]) == 0
    assert main(["limits", "boundary", *base]) == 1


def test_tables_penalized(tmp_path, capsys):
    out = tmp_path / "t"
    common = ["tables", "--which", "penalized", "--reps", "100", "--limit-reps", "100", "--rho", "0.5",
              "--out-dir", str(out)]
    assert main(common) == 1
    assert "alpha" in capsys.readouterr().err
    assert main(common + ["--alpha", "1.0"]) == 0
    raw = rows(out / "penalized-raw.csv")
    assert raw[0][:2] == ["z", "se"] and len(raw) == 12
    report = json.loads((out / "penalized.json").read_text())
    assert report["provenance"]["config"]["alpha"] == 1.0


def test_tables_interior_and_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"reps": 100, "rhos": [0.5], "phis": ["identity"], "seed": 7}))
    args = ["tables", "--which", "interior", "--config", str(cfg), "--quantile-reps", "500",
            "--cache-dir", str(tmp_path / "c"), "--out-dir", str(tmp_path / "o")]
    assert main(args) == 0
    r = rows(tmp_path / "o" / "interior-identity.csv")
    assert len(r) == 16 and r[0][2].endswith("t0=1/3")
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(args) == 1
    cfg.write_text("{not json")
    assert main(args) == 1


def test_tables_boundary_ell(tmp_path):
    args = ["tables", "--which", "boundary", "--ell", "1", "--reps", "100", "--limit-reps", "100",
            "--phi", "identity", "--rho", "0", "--out-dir", str(tmp_path)]
    assert main(args) == 0
    assert (tmp_path / "boundary-normalized.csv").exists()
