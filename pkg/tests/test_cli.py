import csv
import io
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from drfd.cli import main, parse_alphas, UsageError
from drfd.io import write_dataset_csv, write_matrix_csv


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def scalar_files(tmp_path):
    write_matrix_csv(tmp_path / "m.csv", [[0.25]])
    write_matrix_csv(tmp_path / "s.csv", [[1.0]])
    write_matrix_csv(tmp_path / "one.csv", [[1.0]])
    return tmp_path


def test_bound_kappa_two(scalar_files, capsys):
    code, out, _ = run(["bound", "--alpha", 1, "--M", scalar_files / "m.csv", "--S0", scalar_files / "s.csv",
                        "--gamma2", 1], capsys)
    assert code == 0
    res = json.loads(out)
    assert res["value"] == pytest.approx(1 / 9, abs=1e-15)
    assert res["branch"] == "SmallDeviation"


def test_bound_alpha_sweep(tmp_path, capsys):
    svg = tmp_path / "c.svg"
    code, out, _ = run(["bound", "--sweep", "alpha", "--alphas", "1:1024", "--svg", svg], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 11
    c = [float(r["c_alpha"]) for r in rows]
    assert c[0] == pytest.approx(4 / 9, abs=1e-15)
    assert all(b > a for a, b in zip(c, c[1:]))
    assert svg.read_text().startswith("<svg")


def test_bound_missing_file(tmp_path, capsys):
    code, _, err = run(["bound", "--M", tmp_path / "nope.csv", "--S0", tmp_path / "nope.csv"], capsys)
    assert code == 2 and "nope.csv" in err


def test_bound_bounded_and_dump(scalar_files, capsys):
    sup = scalar_files / "sup.json"
    sup.write_text(json.dumps([{"a": [0.0], "Theta": [[1e-6]]}]))
    dump = scalar_files / "dump.txt"
    code, out, _ = run(["--dump-sdp", dump, "bound", "--alpha", 1, "--M", scalar_files / "m.csv",
                        "--S0", scalar_files / "s.csv", "--support", sup], capsys)
    assert code == 0
    res = json.loads(out)
    assert res["method"] == "bounded-gauss" and res["value"] <= 1 / 9 + 1e-6
    assert "# sdp sense=" in dump.read_text()


def test_design_scalar(scalar_files, capsys):
    f = scalar_files
    code, out, _ = run(["design", "--W", f / "one.csv", "--V", f / "one.csv", "--S0", f / "s.csv", "--alpha", 1,
                        "--epsilon", 0.1, "--scheme", "dr-u-a", "--metric", "rho1"], capsys)
    assert code == 0
    res = json.loads(out)
    assert len(res) == 1
    assert res[0]["objective"] == pytest.approx(0.225, rel=1e-12)
    assert res[0]["scheme"] == "DR-U-a"


def test_design_bad_scheme(scalar_files, capsys):
    f = scalar_files
    code, _, _ = run(["design", "--W", f / "one.csv", "--V", f / "one.csv", "--S0", f / "s.csv",
                      "--scheme", "dr-x"], capsys)
    assert code == 2


def test_design_sweep_ordering(tmp_path, capsys):
    rng = np.random.default_rng(0)
    A = rng.standard_normal((3, 3))
    S0 = A @ A.T / 3 + 0.5 * np.eye(3)
    write_matrix_csv(tmp_path / "s.csv", S0)
    write_matrix_csv(tmp_path / "w.csv", rng.standard_normal((2, 3)))
    write_matrix_csv(tmp_path / "v.csv", rng.standard_normal((2, 1)))
    h = 2.0 * np.sqrt(np.diag(S0))
    sup = [{"a": [0.0] * 3, "Theta": np.diag(np.eye(3)[i] / h[i] ** 2).tolist()} for i in range(3)]
    (tmp_path / "sup.json").write_text(json.dumps(sup))
    code, out, _ = run(["design", "--sweep", "epsilon", "--epsilons", "0.02,0.1", "--W", tmp_path / "w.csv",
                        "--V", tmp_path / "v.csv", "--S0", tmp_path / "s.csv", "--alpha", 3,
                        "--support", tmp_path / "sup.json", "--grid", 6], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 2
    for r in rows:
        assert float(r["DR-B-a"]) >= float(r["DR-U-a"]) - 1e-6
        assert float(r["DR-U-a"]) >= float(r["DR-U"])
        assert float(r["DR-B-a"]) >= float(r["DR-B"]) - 1e-6


def test_threshold_fallback(scalar_files, capsys):
    f = scalar_files
    code, out, _ = run(["threshold", "--M", f / "one.csv", "--S0", f / "s.csv", "--alpha", 1,
                        "--epsilon", 0.2], capsys)
    assert code == 0
    assert json.loads(out)["J_th"] == pytest.approx(4 / 9 / 0.2, rel=1e-12)


def test_unknown_config_key(scalar_files, capsys):
    cfg = scalar_files / "cfg.json"
    cfg.write_text(json.dumps({"epsilon": 0.1, "colour": "red"}))
    code, _, err = run(["--config", cfg, "threshold", "--M", scalar_files / "one.csv"], capsys)
    assert code == 2 and "colour" in err


def test_config_file_and_flag_override(scalar_files, capsys):
    f = scalar_files
    cfg = f / "cfg.json"
    cfg.write_text(json.dumps({"epsilon": 0.1, "alpha": 1, "S0": str(f / "s.csv"), "M": str(f / "one.csv")}))
    _, out, _ = run(["--config", cfg, "threshold"], capsys)
    assert json.loads(out)["J_th"] == pytest.approx(4 / 9 / 0.1, rel=1e-12)
    _, out, _ = run(["--config", cfg, "threshold", "--epsilon", 0.2], capsys)
    assert json.loads(out)["J_th"] == pytest.approx(4 / 9 / 0.2, rel=1e-12)


def test_usage_errors(capsys):
    assert run([], capsys)[0] == 2
    assert run(["frobnicate"], capsys)[0] == 2
    assert run(["bound", "--sweep", "alpha", "--alphas", "4:1"], capsys)[0] == 2
    with pytest.raises(UsageError):
        parse_alphas("0:3")
    assert parse_alphas("1:8") == [1.0, 2.0, 4.0, 8.0]
    assert parse_alphas("1,3") == [1.0, 3.0]


def _simulate(out_dir, capsys, seed=3):
    return run(["simulate", "--seed", seed, "--N-train", 300, "--N-test", 400, "--fault-onset", 100,
                "--out-dir", out_dir], capsys)


def test_simulate_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _simulate(a, capsys)[0] == 0
    assert _simulate(b, capsys)[0] == 0
    for name in ("train.csv", "test.csv", "model.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    model = json.loads((a / "model.json").read_text())
    assert model["n_r"] == 11 and np.asarray(model["V"]).shape[0] == 11


def test_seed_env_override(tmp_path, capsys, monkeypatch):
    _simulate(tmp_path / "a", capsys, seed=3)
    monkeypatch.setenv("DRFD_SEED", "3")
    _simulate(tmp_path / "b", capsys, seed=99)
    assert (tmp_path / "a" / "train.csv").read_bytes() == (tmp_path / "b" / "train.csv").read_bytes()


def test_simulate_bad_onset(tmp_path, capsys):
    code, _, _ = run(["simulate", "--N-test", 100, "--fault-onset", 100, "--out-dir", tmp_path], capsys)
    assert code == 2


def test_eval_zero_fault(tmp_path, capsys):
    code, _, _ = run(["simulate", "--seed", 1, "--N-train", 2000, "--N-test", 4000, "--fault-onset", 2000,
                      "--fault-magnitude", 0, "--out-dir", tmp_path], capsys)
    assert code == 0
    code, out, _ = run(["eval", "--train", tmp_path / "train.csv", "--test", tmp_path / "test.csv",
                        "--model", tmp_path / "model.json", "--scheme", "dr-u", "dr-u-a",
                        "--bootstrap", 200, "--epsilon", 0.2], capsys)
    assert code == 0
    rows = {r["rate"]: r for r in csv.DictReader(io.StringIO(out))}
    assert list(rows["FAR"])[1:] == ["DR-U", "DR-U-a", "GLRT-chi2"]
    for col in ("DR-U", "DR-U-a", "GLRT-chi2"):
        far, fdr = float(rows["FAR"][col]), float(rows["FDR"][col])
        se = math.sqrt(max(far * (1 - far), 1e-4) / 2000)
        assert abs(far - fdr) <= 4 * math.sqrt(2) * se


def test_eval_needs_test_file(tmp_path, capsys):
    _simulate(tmp_path, capsys)
    code, _, _ = run(["eval", "--train", tmp_path / "train.csv", "--model", tmp_path / "model.json"], capsys)
    assert code == 2


def test_design_failure_exit_code(scalar_files, capsys, monkeypatch):
    import drfd.design as dsg
    from drfd.errors import DesignFailed

    def boom(*a, **k):
        raise DesignFailed("no grid point", {"points": []})

    monkeypatch.setattr(dsg, "design_for_scheme", boom)
    f = scalar_files
    code, _, err = run(["design", "--W", f / "one.csv", "--V", f / "one.csv", "--S0", f / "s.csv"], capsys)
    assert code == 3 and "points" in err


def test_invariant_exit_code(scalar_files, capsys, monkeypatch):
    import drfd.cli as cli
    from drfd.errors import InvariantViolation

    def bad(cfg):
        raise InvariantViolation("broken")

    monkeypatch.setitem(cli.COMMANDS, "bound", bad)
    assert run(["bound"], capsys)[0] == 4


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "drfd", "bound", "--sweep", "alpha", "--alphas", "1,2"],
                         capture_output=True, text=True, check=True)
    assert out.stdout.splitlines()[0] == "alpha,c_alpha,bound"
    help_ = subprocess.run([sys.executable, "-m", "drfd", "--help"], capture_output=True, text=True)
    assert help_.returncode == 0
    for cmd in ("bound", "design", "threshold", "simulate", "eval", "sweep"):
        assert cmd in help_.stdout
