import json
import shutil
import subprocess

import numpy as np
import pytest

from truncgauss import cli
from truncgauss import tables as T


def run(*argv):
    return cli.main([str(a) for a in argv])


def _csv_body(path):
    return [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]


def _csv_manifest(path):
    return json.loads("\n".join(ln[2:] for ln in path.read_text().splitlines()
                                if ln.startswith("# ")))


def test_sample_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert run("sample", "--dist", "tn1", "--a", 1.5, "--n", 200, "--seed", 5, "--out", p) == 0
    assert _csv_body(a) == _csv_body(b)
    rows = np.array([float(v) for v in _csv_body(a)[1:]])
    assert rows.size == 200 and np.all(rows >= 1.5)


def test_sample_manifest_fields(tmp_path):
    out = tmp_path / "s.csv"
    run("sample", "--dist", "tn2-semi", "--rho", -0.5, "--a1", 1, "--a2", 0.2, "--n", 50,
        "--seed", 9, "--out", out)
    man = _csv_manifest(out)
    assert man["seed"] == 9 and man["subcommand"] == "sample"
    assert man["parameters"]["case"] == "SMinus"
    assert len(man["table"]["sha256"]) == 64
    assert man["counts"]["n"] == 50


def test_sample_location_scale(tmp_path):
    out = tmp_path / "s.json"
    run("sample", "--dist", "tn1", "--a", 3, "--b", 4, "--mu", 2, "--sd", 0.5, "--n", 100,
        "--format", "json", "--out", out)
    x = np.array(json.loads(out.read_text())["samples"])
    assert np.all((x >= 3) & (x <= 4))


def test_sample_box_binary_roundtrip(tmp_path):
    out = tmp_path / "s.bin"
    assert run("sample", "--dist", "tn2-box", "--rho", 0.4, "--a1", -1, "--b1", 1,
               "--a2", 0, "--b2", 2, "--n", 300, "--format", "bin", "--out", out) == 0
    man, x = cli.read_bin(out.read_bytes())
    assert x.shape == (300, 2) and man["parameters"]["dist"] == "tn2-box"
    assert np.all((x[:, 0] >= -1) & (x[:, 0] <= 1) & (x[:, 1] >= 0) & (x[:, 1] <= 2))


def test_sample_tnd_json(tmp_path):
    out = tmp_path / "s.json"
    sigma = json.dumps((0.5 * np.eye(3) + 0.5).tolist())
    assert run("sample", "--dist", "tnd", "--sigma", sigma, "--bounds", "1,0.5,0.3",
               "--n", 100, "--format", "json", "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["manifest"]["parameters"]["chain"] == "plus"
    assert np.array(doc["samples"]).shape == (100, 3)


def test_not_applicable_is_usage_error(capsys):
    sigma = json.dumps([[1, .5, -.3], [.5, 1, .2], [-.3, .2, 1]])
    assert run("sample", "--dist", "tnd", "--sigma", sigma, "--bounds", "1,0.5,0.3") == 2
    err = capsys.readouterr().err
    assert "NotApplicable" in err and "k=3" in err


@pytest.mark.parametrize("argv", [
    ["sample", "--dist", "tn1", "--a", 2, "--b", 1],
    ["sample", "--dist", "tn2-box", "--a1", 1, "--b1", 0],
    ["sample", "--dist", "tn2-semi", "--rho", 1.0],
    ["sample", "--dist", "tnd"],
    ["sample", "--dist", "tn1", "--n", -1],
    ["sample", "--dist", "nope"],
    ["sample", "--dist", "tn1", "--seed", 2**64],
    ["bench", "--algorithms", "table,bogus", "--n", 10],
    ["bench", "--a-grid", "0:1", "--n", 10],
    ["sample", "--dist", "tn1", "--table", "/nonexistent.bin"],
])
def test_usage_errors_exit_2(argv):
    assert run(*argv) == 2


def test_gen_tables_bytes_are_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    for p in (a, b):
        assert run("gen-tables", "--ns", 999, "--out", p) == 0
    assert a.read_bytes() == b.read_bytes()
    assert "footprint=" in capsys.readouterr().out
    t = T.load_table(a)
    assert t.n_stored <= 999
    man = json.loads((tmp_path / "a.bin.manifest.json").read_text())
    assert man["table"]["N"] == t.N


def test_gen_tables_json(tmp_path):
    out = tmp_path / "t.json"
    assert run("gen-tables", "--ns", 500, "--format", "json", "--out", out) == 0
    assert json.loads(out.read_text())["N_s"] <= 500


def test_sample_with_table_file(tmp_path):
    tab = tmp_path / "t.bin"
    run("gen-tables", "--ns", 1000, "--out", tab)
    out = tmp_path / "s.csv"
    assert run("sample", "--dist", "tn1", "--a", 0.5, "--n", 20, "--table", tab, "--out", out) == 0
    assert _csv_manifest(out)["table"]["N_s"] <= 1000


def test_bench_csv(tmp_path):
    out = tmp_path / "b.csv"
    assert run("bench", "--a-grid", "0,1", "--algorithms", "table,inverse", "--n", 1000,
               "--repeats", 1, "--out", out) == 0
    body = _csv_body(out)
    assert len(body) == 1 + 4


def test_histogram(tmp_path, capsys):
    out = tmp_path / "h.csv"
    assert run("histogram", "--experiment", "fig4", "--n-problems", 20, "--n-props", 50,
               "--seed", 1, "--out", out) == 0
    assert len(_csv_body(out)) == 21
    assert "min=" in capsys.readouterr().out
    assert "summary" in _csv_manifest(out)


def test_validate_report(tmp_path):
    out = tmp_path / "v.json"
    code = run("validate", "--suite", "multivariate", "--scale", 0.02, "--out", out)
    doc = json.loads(out.read_text())
    assert code == (0 if doc["passed"] else 1)
    assert all(c["criterion"] == 12 for c in doc["checks"])


def test_console_script():
    exe = shutil.which("truncgauss")
    if exe is None:
        pytest.skip("console script not installed")
    r = subprocess.run([exe, "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "truncgauss" in r.stdout
