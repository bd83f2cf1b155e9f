import math

import numpy as np
import pytest

from shrinktest.errors import InvalidArgumentError
from shrinktest.fullbayes import HyperGrid
from shrinktest.oracle import TwoGroupsParams, oracle_exact_errors
from shrinktest.priors import horseshoe
from shrinktest.rules import ProcedureKind, ProcedureSpec
from shrinktest.simulation import (
    CSV_COLUMNS,
    SimConfig,
    config_from_dict,
    config_to_dict,
    estimates_to_csv,
    fmt,
    generate_replicate,
    read_mp_csv,
    replicate_rng,
    run_mp_study,
)

ORACLE = ProcedureSpec(ProcedureKind.ORACLE)
NOTHING = ProcedureSpec(ProcedureKind.BH, bh_alpha=1e-300, name="reject-nothing")
EB_HS = ProcedureSpec(ProcedureKind.EMPIRICAL_BAYES, prior=horseshoe())


def test_fmt_round_trips():
    for v in (0.1, 1 / 3, 1e-300, 123456789.123456789, -2.5):
        assert float(fmt(v)) == v
    assert fmt(7) == "7" and fmt(np.int64(3)) == "3" and fmt(True) == "true"


def test_generate_null_limit():
    params = TwoGroupsParams(200, 1e-12, 10.0)
    xs, truth = generate_replicate(params, replicate_rng(1, 0, 0))
    assert not truth.any()
    assert xs.var() == pytest.approx(1.0, abs=0.3)


def test_generate_is_deterministic():
    params = TwoGroupsParams(200, 0.1, 10.0)
    a = generate_replicate(params, replicate_rng(42, 3, 17))
    b = generate_replicate(params, replicate_rng(42, 3, 17))
    assert a[0].tobytes() == b[0].tobytes() and a[1].tobytes() == b[1].tobytes()
    c = generate_replicate(params, replicate_rng(42, 3, 18))
    assert a[0].tobytes() != c[0].tobytes()


def test_signal_fraction():
    params = TwoGroupsParams(10**6, 0.1, 10.0)
    _, truth = generate_replicate(params, replicate_rng(5, 0, 0))
    assert abs(truth.mean() - 0.1) <= 3 * math.sqrt(0.09 / 1e6)


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        SimConfig(m=1)
    with pytest.raises(InvalidArgumentError):
        SimConfig(p_grid=(0.0,))
    with pytest.raises(InvalidArgumentError):
        SimConfig(n_reps=0)
    with pytest.raises(InvalidArgumentError):
        config_from_dict({"m": 100, "colour": "red"})
    assert SimConfig(m=200).resolved_psi2 == pytest.approx(2 * math.log(200))


def test_config_round_trip():
    raw = {
        "m": 150,
        "p_grid": [0.05, 0.2],
        "psi": 3.0,
        "n_reps": 10,
        "seed": 9,
        "procedures": [
            {"kind": "EmpiricalBayes", "prior": "horseshoe"},
            {"kind": "TunedTau", "prior": "TPBN", "alpha": 1, "beta": 0.6, "tau_rule": "p^0.3"},
            {"kind": "FullBayes", "prior": "sdp", "grid": {"n_tau": 40, "n_sigma": 20, "on_escape": "warn"}},
            {"kind": "BH", "bh_alpha": 0.1},
            {"kind": "Oracle"},
        ],
    }
    cfg = config_from_dict(raw)
    assert cfg.resolved_psi2 == pytest.approx(9.0)
    again = config_from_dict(config_to_dict(cfg))
    assert config_to_dict(again) == config_to_dict(cfg)
    assert [p.tag for p in again.procedures] == [p.tag for p in cfg.procedures]


def test_oracle_mp_matches_exact_risk():
    cfg = SimConfig(m=200, p_grid=(0.01,), psi2=3.2552**2, n_reps=400, seed=3, procedures=(ORACLE, NOTHING))
    est = {e.procedure: e for e in run_mp_study(cfg, threads=1)}
    exact = oracle_exact_errors(cfg.params(0.01))[2] / 200
    assert abs(est["Oracle"].mp_mean - exact) <= 3 * est["Oracle"].mp_se
    assert abs(est["reject-nothing"].mp_mean - 0.01) <= 3 * est["reject-nothing"].mp_se


def test_eb_beats_reject_all():
    cfg = SimConfig(m=200, p_grid=(0.05,), n_reps=30, seed=4, procedures=(EB_HS,))
    est = run_mp_study(cfg, threads=1)[0]
    assert est.mp_mean <= 1 - 0.05


def test_thread_count_does_not_change_results():
    cfg = SimConfig(m=100, p_grid=(0.1, 0.3), n_reps=24, seed=11, procedures=(EB_HS, ORACLE))
    one = estimates_to_csv(run_mp_study(cfg, threads=1), cfg)
    two = estimates_to_csv(run_mp_study(cfg, threads=2), cfg)
    assert one == two


def test_failed_replicates_are_dropped():
    strict = HyperGrid.log_uniform(n_tau=20, tau_range=(0.2, 1.0), n_sigma=10, escape_tol=0.0)
    fb = ProcedureSpec(ProcedureKind.FULL_BAYES, prior=horseshoe(), grid=strict)
    cfg = SimConfig(m=50, p_grid=(0.1,), n_reps=5, seed=1, procedures=(fb, ORACLE))
    est = run_mp_study(cfg, threads=1)
    assert all(e.n_reps == 0 and e.n_dropped == 5 for e in est)
    assert all(math.isnan(e.mp_mean) for e in est)


def test_csv_format(tmp_path):
    cfg = SimConfig(m=100, p_grid=(0.1,), n_reps=5, seed=2, procedures=(ORACLE,))
    text = estimates_to_csv(run_mp_study(cfg, threads=1), cfg)
    assert "\r" not in text and text.endswith("\n")
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    path = tmp_path / "mp.csv"
    path.write_text(text)
    row = read_mp_csv(path)[0]
    assert row["procedure"] == "Oracle" and row["n_reps"] == 5 and row["seed"] == 2


def test_unknown_procedure_kind_is_invalid_argument():
    with pytest.raises(InvalidArgumentError):
        config_from_dict({"procedures": [{"kind": "eb"}]})
    with pytest.raises(InvalidArgumentError):
        config_from_dict({"procedures": [{"prior": "horseshoe"}]})
