import csv
import json

import numpy as np
import pytest

from pllay.cli import dumps, fmt, main
from pllay.data import GridFunction, save_grid
from pllay.datasets import synth_digit8
from pllay.landscape import LandscapeParams, landscape
from pllay.persistence import PersistenceDiagram


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def digit8(tmp_path):
    p = tmp_path / "digit8.csv"
    save_grid(synth_digit8(), p)
    return p


def write_diagram(path, pairs):
    d = PersistenceDiagram(np.array([p[0] for p in pairs], dtype=float),
                           np.array([p[1] for p in pairs], dtype=float),
                           np.array([p[2] for p in pairs], dtype=np.int64))
    path.write_text(json.dumps(d.to_json()))
    return path


def test_fmt_17_digits():
    assert fmt(0.1) == "0.10000000000000001"
    assert json.loads(dumps({"a": [0.1, 1.0, float("inf")]})) == {"a": [0.1, 1.0, "inf"]}


def test_diagram_digit8(capsys, digit8):
    code, out, _ = run(capsys, "diagram", digit8)
    assert code == 0
    pairs = json.loads(out)["pairs"]
    assert sum(p["dim"] == 1 for p in pairs) >= 1
    assert "pairing" in json.loads(out)


def test_diagram_constant_grid_finite(capsys, tmp_path):
    p = tmp_path / "flat.csv"
    save_grid(GridFunction(5, 5, np.full(25, 0.3)), p)
    code, out, _ = run(capsys, "diagram", p, "--filtration", "raw", "--finite")
    assert code == 0 and json.loads(out)["pairs"] == []


def test_diagram_bad_path(capsys, tmp_path):
    code, out, err = run(capsys, "diagram", tmp_path / "missing.csv")
    assert code != 0 and out == "" and "pllay: error" in err


def test_diagram_rips_cloud(capsys, tmp_path):
    p = tmp_path / "square.csv"
    p.write_text("0,0\n1,0\n1,1\n0,1\n")
    code, out, _ = run(capsys, "diagram", p, "--filtration", "rips", "--finite")
    h1 = [q for q in json.loads(out)["pairs"] if q["dim"] == 1]
    assert code == 0 and len(h1) == 1
    assert h1[0]["b"] == pytest.approx(0.5) and h1[0]["d"] == pytest.approx(np.sqrt(2) / 2)


def test_landscape_empty(capsys, tmp_path):
    d = write_diagram(tmp_path / "e.json", [])
    code, out, _ = run(capsys, "landscape", d, "--m", 7)
    rows = list(csv.reader(out.splitlines()))
    assert code == 0 and rows[0] == ["t", "k1", "k2", "k3"] and len(rows) == 8
    assert all(float(v) == 0.0 for r in rows[1:] for v in r[1:])


def test_landscape_k1_and_bit_exact(capsys, tmp_path):
    pairs = [(0.1, 0.7, 1), (0.2, 0.5, 1), (0.0, 0.9, 0)]
    d = write_diagram(tmp_path / "d.json", pairs)
    code, out, _ = run(capsys, "landscape", d, "--k-max", 1, "--m", 9, "--dim", 1)
    rows = list(csv.reader(out.splitlines()))
    assert rows[0] == ["t", "k1"] and all(len(r) == 2 for r in rows)
    ref = landscape(PersistenceDiagram.from_json(d.read_text()), LandscapeParams(1, 0.0, 1.0, 9), 1)
    got = np.array([float(r[1]) for r in rows[1:]])
    np.testing.assert_array_equal(got, ref.values[0])


def test_distance(capsys, tmp_path):
    a = write_diagram(tmp_path / "a.json", [(0, 4, 0)])
    b = write_diagram(tmp_path / "b.json", [(0, 4, 0), (1.5, 2.5, 0)])
    _, out, _ = run(capsys, "distance", a, a, "--q", 1, 2)
    res = json.loads(out)
    assert res["bottleneck"] == 0 and res["w"] == {"1": 0, "2": 0}
    _, out, _ = run(capsys, "distance", a, b)
    res = json.loads(out)
    assert res["bottleneck"] == pytest.approx(0.5) and res["w"]["1"] == pytest.approx(0.5)


def test_gradcheck_cli(capsys):
    code, out, err = run(capsys, "gradcheck", "--n-inputs", 3)
    rep = json.loads(out)
    assert code == 0 and rep["pass"] and rep["max_rel_err"] <= 1e-4 and err.startswith("PASS")
    code, out, err = run(capsys, "gradcheck", "--n-inputs", 2, "--break-sign")
    assert code == 1 and err.startswith("FAIL")
    code, out, _ = run(capsys, "gradcheck", "--n-inputs", 1, "--fixture", "symmetric")
    assert json.loads(out)["flagged"] > 0


def test_stability_cli(capsys):
    code, out, _ = run(capsys, "stability", "--trials", 20)
    rep = json.loads(out)
    assert code == 0
    assert {"max_ratio", "violations", "trials", "excluded", "pass"} <= set(rep)
    assert sum(rep["violations"].values()) == 0 and rep["excluded"] >= 1


def test_orbit_gen(capsys, tmp_path):
    code, _, _ = run(capsys, "orbit-gen", tmp_path / "orb", "--per-class", 2, "--n-points", 10)
    man = json.loads((tmp_path / "orb" / "labels.json").read_text())
    assert code == 0 and len(man["clouds"]) == 10
    first = np.loadtxt(tmp_path / "orb" / man["clouds"][0]["file"], delimiter=",")
    assert first.shape == (10, 2)


def test_orbit_dry_run(capsys, tmp_path):
    code, out, _ = run(capsys, "orbit-exp", "--dry-run", "--seeds", 0, "-o", tmp_path / "x.csv")
    assert code == 0 and json.loads(out)
    assert not (tmp_path / "x.csv").exists()


def test_orbit_small_run(capsys, tmp_path):
    pc = tmp_path / "pc.csv"
    code, out, _ = run(capsys, "orbit-exp", "--per-class", 6, "--n-points", 60, "--epochs", 3, "--seeds", 0,
                       "--grid-size", 12, "--n-h", 4, "--per-class-out", pc)
    rows = list(csv.DictReader(out.splitlines()))
    assert code in (0, 1) and len(rows) == 1
    pcs = list(csv.DictReader(pc.read_text().splitlines()))
    for model in ("raw", "pllay"):
        sel = [r for r in pcs if r["model"] == model]
        assert len(sel) == 5
        total = sum(int(r["count"]) for r in sel)
        correct = sum(int(r["correct"]) for r in sel)
        key = f"{model}_mlp_test_acc"
        assert total == 9 and correct / total == pytest.approx(float(rows[0][key]))


def test_train_and_config(capsys, tmp_path):
    rng = np.random.default_rng(0)
    y = np.repeat([0, 1], 30)
    x = rng.normal(size=(60, 3)) + 3 * y[:, None]
    np.savetxt(tmp_path / "x.csv", x, delimiter=",")
    np.savetxt(tmp_path / "y.csv", y, fmt="%d")
    ck = tmp_path / "model.json"
    code, out, _ = run(capsys, "train", tmp_path / "x.csv", "--labels", tmp_path / "y.csv", "--epochs", 30,
                       "--lr", 0.01, "--checkpoint", ck)
    lines = out.splitlines()
    assert code == 0 and lines[0] == "epoch,loss,train_acc,test_acc" and len(lines) == 31
    assert float(lines[-1].split(",")[3]) >= 0.9
    assert json.loads(ck.read_text())["widths"] == [3, 32, 2]
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 4, "hidden": [5]}))
    _, out, _ = run(capsys, "train", tmp_path / "x.csv", "--labels", tmp_path / "y.csv", "--config", cfg)
    assert len(out.splitlines()) == 5
    _, out, _ = run(capsys, "train", tmp_path / "x.csv", "--labels", tmp_path / "y.csv", "--config", cfg,
                    "--epochs", 2)
    assert len(out.splitlines()) == 3
    cfg.write_text(json.dumps({"bogus": 1}))
    code, _, err = run(capsys, "train", tmp_path / "x.csv", "--labels", tmp_path / "y.csv", "--config", cfg)
    assert code == 2 and "bogus" in err


def test_deterministic(capsys, digit8):
    _, a, _ = run(capsys, "diagram", digit8, "--seed", 3)
    _, b, _ = run(capsys, "diagram", digit8, "--seed", 3)
    assert a == b


def test_forward_matches_landscape_cli(capsys, tmp_path, digit8):
    m, j = 21, 8
    dg = tmp_path / "d.json"
    run(capsys, "diagram", digit8, "-o", dg)
    _, out, _ = run(capsys, "landscape", dg, "--k-max", 1, "--m", m, "--t-max", 0.5, "--dim", 1)
    lam = np.array([float(r.split(",")[1]) for r in out.splitlines()[1:]])
    sigma = np.zeros(m)
    sigma[j] = 1.0
    cfg = {"n_h": 1, "g": "affine", "k_max": 1, "t_min": 0.0, "t_max": 0.5, "m": m, "dim": 1,
           "filtration": {"kind": "dtm-weights", "m0": 0.05},
           "params": {"sigma": [sigma.tolist()], "mu": [[0.0] * m], "logits": [[0.0]]}}
    lay = tmp_path / "layer.json"
    lay.write_text(json.dumps(cfg))
    code, out, _ = run(capsys, "pllay-forward", digit8, "--layer", lay)
    assert code == 0
    assert json.loads(out)["output"][0] == lam[j]
    assert lam[j] > 0
