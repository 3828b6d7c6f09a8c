import json
import subprocess
import sys

import pytest

from privcp.cli import main
from privcp.harness import CSV_HEADER, TIMING_COLUMNS


@pytest.fixture
def scores_csv(tmp_path):
    p = tmp_path / "scores.csv"
    p.write_text("score\n0.1\n0.2\n0.3\n")
    return p


@pytest.fixture
def config(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"n": 400, "replications": 5, "base_seed": 2}))
    return p


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_quantile_prints_threshold_and_trace(capsys, scores_csv):
    code, out, _ = _run(capsys, "quantile", "--scores", str(scores_csv), "--alpha", "0.5", "--rho", "1e6", "--seed", "1")
    assert code == 0
    res = json.loads(out)
    assert res["mechanism"] == "pcoqs" and res["iterations_used"] == 34
    assert len(res["trace"]) == 34
    # every threshold in [0.2, 0.3) covers exactly r = 2 scores
    assert 0.2 - 1e-6 <= res["threshold"] < 0.3
    assert res["target_rank"] == 2 and res["seed"] == 1


def test_quantile_is_seeded(capsys, scores_csv, monkeypatch):
    argv = ("quantile", "--scores", str(scores_csv), "--alpha", "0.5", "--rho", "0.1")
    monkeypatch.setenv("PCOQS_SEED", "9")
    a = json.loads(_run(capsys, *argv)[1])
    b = json.loads(_run(capsys, *argv, "--seed", "9")[1])
    assert a["threshold"] == b["threshold"] and a["seed"] == 9
    c = json.loads(_run(capsys, *argv, "--seed", "10")[1])
    assert c["threshold"] != a["threshold"]


def test_quantile_other_methods(capsys, scores_csv):
    code, out, _ = _run(capsys, "quantile", "--scores", str(scores_csv), "--alpha", "0.5", "--method", "nonprivate")
    assert code == 0 and json.loads(out)["threshold"] == pytest.approx(0.2)
    code, out, _ = _run(
        capsys, "quantile", "--scores", str(scores_csv), "--alpha", "0.5", "--method", "exponq",
        "--rho", "1.0", "--n-bins", "10", "--inflation", "0",
    )
    res = json.loads(out)
    assert code == 0 and res["n_bins"] == 10 and res["inflation"] == 0.0


def test_quantile_loop_flags(capsys, scores_csv):
    base = ("quantile", "--scores", str(scores_csv), "--alpha", "0.5", "--rho", "1.0")
    assert json.loads(_run(capsys, *base, "--inclusive-loop")[1])["iterations_used"] == 35
    assert _run(capsys, *base, "--skip-past-mid", "--release-right-end")[0] == 0


def test_quantile_domain_errors_exit_2(capsys, tmp_path, scores_csv, monkeypatch):
    code, _, err = _run(capsys, "quantile", "--scores", str(scores_csv), "--alpha", "1.5", "--rho", "1")
    assert code == 2 and "alpha" in err
    assert _run(capsys, "quantile", "--scores", str(scores_csv), "--alpha", "0.5")[0] == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("s\n0.1\n1.7\n")
    assert _run(capsys, "quantile", "--scores", str(bad), "--alpha", "0.5", "--rho", "1")[0] == 2
    bad.write_text("s\n0.1\nzero\n")
    assert _run(capsys, "quantile", "--scores", str(bad), "--alpha", "0.5", "--rho", "1")[0] == 2
    monkeypatch.setenv("PCOQS_SEED", "abc")
    assert _run(capsys, "quantile", "--scores", str(scores_csv), "--alpha", "0.5", "--rho", "1")[0] == 2


def test_quantile_missing_file_exit_3(capsys, tmp_path):
    code, _, err = _run(capsys, "quantile", "--scores", str(tmp_path / "nope.csv"), "--alpha", "0.5", "--rho", "1")
    assert code == 3 and "nope.csv" in err


def test_bounds(capsys):
    code, out, _ = _run(capsys, "bounds", "--u", "1e10", "--rho", "0.1", "--beta", "0.01", "--ncal", "3000", "--alpha", "0.1")
    res = json.loads(out)
    assert code == 0
    assert res["tau"] == pytest.approx(54.78, abs=0.005)
    assert res["coverage_lower"] == pytest.approx(0.8817, abs=5e-5)
    assert res["coverage_upper"] == pytest.approx(0.9186, abs=5e-5)
    assert _run(capsys, "bounds", "--u", "1", "--rho", "0.1", "--beta", "0.01", "--ncal", "3", "--alpha", "0.1")[0] == 2


def test_simulate_csv(capsys, config):
    code, out, _ = _run(capsys, "simulate", "--config", str(config))
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 2
    assert lines[0] == ",".join(CSV_HEADER)


def test_simulate_overrides_and_json(capsys, config, tmp_path):
    out_path = tmp_path / "r.json"
    code, _, _ = _run(
        capsys, "simulate", "--config", str(config), "--set", "method=nonprivate", "--set", "base_seed=4",
        "--format", "json", "--out", str(out_path),
    )
    rows = json.loads(out_path.read_text())
    assert code == 0 and rows[0]["method"] == "nonprivate" and rows[0]["base_seed"] == 4


def test_simulate_env_seed(capsys, config, monkeypatch):
    monkeypatch.setenv("PCOQS_SEED", "11")
    out = _run(capsys, "simulate", "--config", str(config))[1]
    assert out.strip().splitlines()[1].endswith(",5,11")


def test_simulate_errors(capsys, config, tmp_path):
    assert _run(capsys, "simulate", "--config", str(config), "--set", "replications=0")[0] == 2
    assert _run(capsys, "simulate", "--config", str(tmp_path / "missing.json"))[0] == 3
    code, _, err = _run(capsys, "simulate", "--config", str(config), "--out", str(tmp_path / "no" / "dir.csv"))
    assert code == 3 and "dir.csv" in err


def test_sweep(capsys, config):
    code, out, _ = _run(capsys, "sweep", "--config", str(config), "--axis", "alpha", "--values", "0.1,0.2")
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 3
    assert lines[1].startswith("alpha,0.1,") and lines[2].startswith("alpha,0.2,")
    assert _run(capsys, "sweep", "--config", str(config), "--axis", "alpha", "--values", "a,b")[0] == 2


def test_bench(capsys, config):
    code, out, _ = _run(capsys, "bench", "--config", str(config), "--methods", "pcoqs,nonprivate")
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 3
    assert ",pcoqs," in lines[1] and ",nonprivate," in lines[2]


def _strip_timing(text):
    lines = text.strip().splitlines()
    header = lines[0].split(",")
    keep = [i for i, h in enumerate(header) if h not in TIMING_COLUMNS]
    return "\n".join(",".join(ln.split(",")[i] for i in keep) for ln in lines)


def test_simulate_subprocess_determinism(config):
    cmd = [sys.executable, "-m", "privcp", "simulate", "--config", str(config)]
    a = subprocess.run(cmd, capture_output=True, text=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, text=True, check=True).stdout
    assert _strip_timing(a) == _strip_timing(b)
