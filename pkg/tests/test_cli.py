import csv
import hashlib
import json
import statistics

import numpy as np
import pytest

from veclorenz.cli import main
from veclorenz.lorenz import identical_alpha_scale


def run(*argv):
    return main([str(a) for a in argv])


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def fits(tmp_path_factory):
    """Fit artifacts for the synthetic families used below."""
    root = tmp_path_factory.mktemp("cli")
    out = {}
    specs = {
        "X": ["--family", "two_point_X", "--n", 2],
        "X_tilde": ["--family", "two_point_X_tilde", "--n", 2],
        "identical": ["--family", "identical", "--n", 10],
        "wide1": ["--family", "lognormal_plackett", "--n", 200, "--sigma1", 1.5, "--sigma2", 0.3],
        "wide2": ["--family", "lognormal_plackett", "--n", 200, "--sigma1", 0.3, "--sigma2", 1.5],
    }
    for name, flags in specs.items():
        d = root / name
        d.mkdir()
        assert run("synth", *flags, "--out", d) == 0
        assert run("fit", d / "synth.csv", "--out", d) == 0
        out[name] = d / "fit.json"
    return out


def test_synth_identical(tmp_path):
    assert run("synth", "--family", "identical", "--n", 10, "--out", tmp_path) == 0
    r = rows(tmp_path / "synth.csv")
    assert len(r) == 10
    assert all(float(x["x1"]) == 1 and float(x["x2"]) == 1 and float(x["weight"]) == pytest.approx(0.1) for x in r)


def test_synth_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    flags = ["--family", "lognormal_plackett", "--sigma1", 1, "--kappa", 2, "--n", 1000, "--seed", 7]
    assert run("synth", *flags, "--out", a) == 0
    assert run("synth", *flags, "--out", b) == 0
    assert sha(a / "synth.csv") == sha(b / "synth.csv")


def test_synth_two_point_tilde(tmp_path):
    assert run("synth", "--family", "two_point_X_tilde", "--n", 100, "--out", tmp_path) == 0
    pts = [(float(x["x1"]), float(x["x2"])) for x in rows(tmp_path / "synth.csv")]
    assert pts.count((0.0, 0.0)) == 50 and pts.count((2.0, 2.0)) == 50


def test_fit_two_point_cells(fits):
    art = json.loads(fits["X"].read_text())
    assert art["schema_version"]
    (fit,) = art["fits"]
    # (2, 0) owns u1 >= u2 and (0, 2) owns u2 >= u1
    cells = {tuple(site): sorted(map(tuple, cell)) for site, cell in zip(fit["sites"], fit["cells"])}
    assert cells[(2.0, 0.0)] == [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)]
    assert cells[(0.0, 2.0)] == [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]


def test_gini_values(fits, tmp_path):
    assert run("gini", fits["X_tilde"], "--out", tmp_path) == 0
    g = json.loads((tmp_path / "gini.json").read_text())
    assert g["gini"] == pytest.approx(2 / 3, abs=1e-6)
    assert run("gini", fits["identical"], "--out", tmp_path) == 0
    assert json.loads((tmp_path / "gini.json").read_text())["gini"] == pytest.approx(0.0, abs=1e-12)


def test_compare_two_point_both_orders(fits, tmp_path):
    assert run("compare", fits["X"], fits["X_tilde"], "--mc", 20000, "--out", tmp_path) == 0
    v = json.loads((tmp_path / "compare.json").read_text())
    assert v["lorenz"] == "B_more_unequal" and v["weak"] == "B_more_unequal"
    assert run("compare", fits["X_tilde"], fits["X"], "--mc", 20000, "--out", tmp_path) == 0
    v = json.loads((tmp_path / "compare.json").read_text())
    assert v["lorenz"] == "A_more_unequal" and v["weak"] == "A_more_unequal"


def test_compare_self_and_crossing(fits, tmp_path):
    assert run("compare", fits["wide1"], fits["wide1"], "--mc", 20000, "--out", tmp_path) == 0
    v = json.loads((tmp_path / "compare.json").read_text())
    assert v["lorenz"] == "equal" and v["weak"] == "equal"
    assert run("compare", fits["wide1"], fits["wide2"], "--mc", 20000, "--out", tmp_path) == 0
    v = json.loads((tmp_path / "compare.json").read_text())
    assert v["lorenz"] == "incomparable"
    assert len(v["lorenz_detail"]["witness"]) == 2


def test_ilf_corner_and_curves(fits, tmp_path):
    assert run("ilf", fits["wide1"], "--grid", 21, "--mc", 5000, "--out", tmp_path) == 0
    r = rows(tmp_path / "ilf.csv")
    corner = [x for x in r if float(x["z1"]) == 1 and float(x["z2"]) == 1]
    assert float(corner[0]["l"]) == 1.0
    assert run("curves", fits["identical"], "--alpha", "0.75", "--grid", 201, "--mc", 100_000,
               "--out", tmp_path) == 0
    pts = np.array([[float(x["z1"]), float(x["z2"])] for x in rows(tmp_path / "curves.csv")])
    m = identical_alpha_scale(0.75)
    assert np.abs(np.minimum(pts[:, 0], pts[:, 1]) - m).max() <= 1 / 200


def test_lorenz_grid(fits, tmp_path):
    assert run("lorenz", fits["X"], "--grid", 5, "--out", tmp_path) == 0
    r = rows(tmp_path / "lorenz.csv")
    assert len(r) == 25
    last = r[-1]
    assert float(last["L1"]) == pytest.approx(1.0) and float(last["L2"]) == pytest.approx(1.0)


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,x2,weight\n1,oops,1\n")
    assert run("fit", bad, "--out", tmp_path) == 3
    assert run("synth", "--family", "nope", "--n", 3, "--out", tmp_path) == 2
    assert run("curves", tmp_path / "missing.json", "--out", tmp_path) == 3
    assert run("synth", "--family", "lognormal_plackett", "--n", 300, "--out", tmp_path) == 0
    assert run("fit", tmp_path / "synth.csv", "--max-iter", 1, "--tol", 1e-12, "--out", tmp_path) == 4


def test_manifest_and_rerun(fits, tmp_path):
    assert run("gini", fits["X"], "--out", tmp_path) == 0
    manifest = tmp_path / "gini.manifest.json"
    rec = json.loads(manifest.read_text())
    before = sha(tmp_path / "gini.json")
    assert rec["outputs"][0]["sha256"] == before
    (tmp_path / "gini.json").unlink()
    assert run("rerun", manifest) == 0
    assert sha(tmp_path / "gini.json") == before
    assert "time" not in manifest.read_text()


def test_rii_gini_is_mean_of_implicates(tmp_path):
    assert run("synth", "--family", "lognormal_plackett", "--n", 100, "--implicates", 5,
               "--kappa", 2, "--out", tmp_path) == 0
    assert run("fit", tmp_path / "synth.csv", "--out", tmp_path) == 0
    assert run("gini", tmp_path / "fit.json", "--rii", "--out", tmp_path) == 0
    g = json.loads((tmp_path / "gini.json").read_text())
    per = [p["gini"] for p in g["per_implicate"]]
    assert len(per) == 5
    assert g["gini"] == statistics.fmean(per)
