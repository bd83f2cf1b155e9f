import hashlib
import json
import math

import numpy as np
import pytest

from shrinktest.cli import dispatch, render_svg


def run(argv, capsys):
    code = dispatch(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_oracle_happy_path(capsys):
    code, out, _ = run(["oracle", "--m", "200", "--p", "0.1", "--psi2", "10.5952"], capsys)
    assert code == 0
    data = json.loads(out)
    assert data["f"] == pytest.approx(9.0)
    assert {"u", "v", "c2", "t1", "t2", "risk"} <= set(data)
    code, out, _ = run(["oracle", "--m", "200", "--p", "0.1", "--psi2", "10.5952", "--C", "1"], capsys)
    assert "t2_asymptotic" in json.loads(out)


def test_usage_errors(capsys):
    code, _, err = run(["simulate"], capsys)
    assert code == 1 and "usage" in err
    code, _, err = run(["frobnicate"], capsys)
    assert code == 1 and "usage" in err
    code, _, err = run([], capsys)
    assert code == 1
    code, _, _ = run(["oracle", "--m", "200", "--p", "1.5", "--psi2", "3"], capsys)
    assert code == 1
    code, _, _ = run(["weight", "--family", "laplace", "--x", "1", "--tau", "1"], capsys)
    assert code == 1


def test_numeric_failure_exit(capsys, monkeypatch):
    from shrinktest import posterior
    from shrinktest.errors import NumericFailureError

    def boom(*a, **k):
        raise NumericFailureError("quadrature did not converge", achieved_tolerance=1.0)

    monkeypatch.setattr(posterior, "mean_shrinkage_weight", boom)
    code, _, err = run(["weight", "--family", "hs", "--x", "1", "--tau", "1"], capsys)
    assert code == 2 and "numeric failure" in err


def test_weight_and_profile(tmp_path, capsys):
    code, out, _ = run(["weight", "--family", "horseshoe", "--x", "3", "--tau", "0.1"], capsys)
    data = json.loads(out)
    assert code == 0 and data["posterior_mean"] == pytest.approx(3 * data["weight"])
    out_csv = tmp_path / "prof.csv"
    code, _, _ = run(["profile", "--family", "tpbn", "--alpha", "0.5", "--beta", "0.5", "--steps", "5", "--xmax", "4", "--out", str(out_csv)], capsys)
    lines = out_csv.read_text().splitlines()
    assert code == 0 and lines[0] == "x,weight,posterior_mean" and len(lines) == 6
    manifest = json.loads((tmp_path / "prof.csv.manifest.json").read_text())
    assert manifest["outputs"]["prof.csv"]["sha256"] == hashlib.sha256(out_csv.read_bytes()).hexdigest()


def test_priors_check(capsys):
    code, out, _ = run(["priors", "check", "--family", "horseshoe"], capsys)
    data = json.loads(out)
    assert code == 0 and data["prior"]["K"] == pytest.approx(1 / math.pi)


@pytest.fixture
def data_csv(tmp_path):
    rng = np.random.default_rng(2)
    xs = rng.standard_normal(200) * np.where(rng.random(200) < 0.1, 3.4, 1.0)
    path = tmp_path / "data.csv"
    path.write_text("x\n" + "\n".join(f"{v:.17g}" for v in xs) + "\n")
    return path


def test_classify(tmp_path, data_csv, capsys):
    out = tmp_path / "dec.csv"
    code, _, _ = run(["classify", "--proc", "eb", "--family", "horseshoe", "--data", str(data_csv), "--out", str(out), "--quiet"], capsys)
    rows = out.read_text().splitlines()
    assert code == 0 and rows[0] == "index,x,statistic,reject" and len(rows) == 201
    code, _, err = run(["classify", "--proc", "tt", "--family", "horseshoe", "--data", str(data_csv)], capsys)
    assert code == 1 and "needs the true p" in err
    code, out_text, _ = run(["classify", "--proc", "tt", "--family", "hs", "--tau-rule", "p", "--p", "0.1", "--psi2", "10.6", "--data", str(data_csv), "--quiet"], capsys)
    assert code == 0 and out_text.count("\n") == 201
    code, _, _ = run(["classify", "--proc", "magic", "--data", str(data_csv)], capsys)
    assert code == 1


def test_tau_posterior(tmp_path, data_csv, capsys):
    out, summ = tmp_path / "tau.csv", tmp_path / "tau.json"
    code, _, _ = run(["tau-posterior", "--family", "hs", "--data", str(data_csv), "--out", str(out), "--summary", str(summ)], capsys)
    assert code == 0
    tau, dens = np.loadtxt(out, delimiter=",", skiprows=1, unpack=True)
    assert np.trapezoid(dens * tau, np.log(tau)) == pytest.approx(1.0, abs=0.02)
    q = json.loads(summ.read_text())["tau_quantiles"]
    assert q["0.05"] <= q["0.5"] <= q["0.95"]


def _sim_config(tmp_path, seed=3):
    cfg = {
        "m": 80,
        "p_grid": [0.1, 0.3],
        "n_reps": 6,
        "seed": seed,
        "procedures": [{"kind": "EmpiricalBayes", "prior": "horseshoe"}, {"kind": "Oracle"}, {"kind": "BH"}],
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_simulate_is_byte_identical(tmp_path, capsys):
    cfg = _sim_config(tmp_path)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["simulate", "--config", str(cfg), "--out", str(a), "--threads", "2", "--quiet"], capsys)[0] == 0
    assert run(["simulate", "--config", str(cfg), "--out", str(b), "--threads", "2", "--quiet"], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text()
    assert "\r" not in text and text.splitlines()[0] == "p,procedure,mp_mean,mp_se,n_reps,m,psi2,seed"
    manifest = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert manifest["config"]["seed"] == 3 and manifest["outputs"]["a.csv"]["sha256"] == hashlib.sha256(a.read_bytes()).hexdigest()
    # re-running from the manifest's resolved config gives the same bytes
    again = tmp_path / "again.json"
    again.write_text(json.dumps(manifest["config"]))
    c = tmp_path / "c.csv"
    assert run(["simulate", "--config", str(again), "--out", str(c), "--threads", "1", "--quiet"], capsys)[0] == 0
    assert c.read_bytes() == a.read_bytes()


def test_seed_env_override(tmp_path, capsys, monkeypatch):
    cfg = _sim_config(tmp_path)
    monkeypatch.setenv("SHRINKTEST_SEED", "99")
    out = tmp_path / "s.csv"
    assert run(["simulate", "--config", str(cfg), "--out", str(out), "--threads", "1", "--quiet"], capsys)[0] == 0
    assert out.read_text().splitlines()[1].endswith(",99")
    monkeypatch.setenv("SHRINKTEST_SEED", "abc")
    assert run(["simulate", "--config", str(cfg), "--out", str(out), "--quiet"], capsys)[0] == 1


def test_verify_bounds_exit_codes(tmp_path, capsys):
    rep = tmp_path / "r.json"
    code, _, _ = run(["verify-bounds", "--suite", "lemmas", "--family", "horseshoe", "--report", str(rep), "--quiet"], capsys)
    assert code == 0
    body = json.loads(rep.read_text())
    assert {"check", "grid", "worst_ratio", "slack", "verdict", "witnesses"} <= set(body["reports"][0])
    code, _, _ = run(["verify-bounds", "--suite", "hard", "--family", "horseshoe", "--slack", "0", "--quiet"], capsys)
    assert code == 3
    code, _, _ = run(["verify-bounds", "--suite", "lemmas", "--family", "sdp", "--quiet"], capsys)
    assert code == 3


def test_verify_bounds_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        run(["verify-bounds", "--suite", "small-tau", "--family", "hs", "--report", str(path), "--quiet"], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_plot(tmp_path, capsys):
    mp_csv = tmp_path / "mp.csv"
    mp_csv.write_text("p,procedure,mp_mean,mp_se,n_reps,m,psi2,seed\n0.1,A,0.05,0.01,5,80,8.7,1\n0.3,A,0.15,0.01,5,80,8.7,1\n0.1,B,0.06,0.01,5,80,8.7,1\n0.3,B,0.2,0.01,5,80,8.7,1\n")
    out = tmp_path / "mp.svg"
    assert run(["plot", "--in", str(mp_csv), "--out", str(out)], capsys)[0] == 0
    svg = out.read_text()
    assert svg.startswith("<svg") and svg.count("<polyline") == 2
    with pytest.raises(Exception):
        render_svg([])


def test_missing_file(capsys):
    assert run(["classify", "--proc", "bh", "--data", "/nonexistent.csv"], capsys)[0] == 1
