import json
import math

import pytest
from scipy import stats

from ifpcsim.harness import calibrate as cal
from ifpcsim.harness import lemmas
from ifpcsim.harness.config import ConfigError, ExperimentConfig
from ifpcsim.harness.experiment import aggregate, read_trials, run_experiment
from ifpcsim.harness.stats import mean_stderr, proportion, wilson


def cfg(**kw):
    base = dict(kind="ifpc-game", n=3, N=12, ell=200, sigma=6.0, trials=6, base_seed=40)
    base.update(kw)
    return ExperimentConfig.from_dict(base)


@pytest.mark.parametrize("bad", [
    {"kind": "poker"},
    {"kind": "ifpc-game", "n": 0},
    {"kind": "ifpc-game", "beta": 0.5},
    {"kind": "ifpc-game", "delta": 0.0},
    {"kind": "ifpc-game", "mode": "paper", "ell": 10},
    {"kind": "ifpc-game", "pirate": "telepath"},
    {"kind": "attack", "oracle": "psychic"},
    {"kind": "ifpc-game", "trials": 0},
    {"kind": "ifpc-game", "schema_version": 2},
    {"kind": "ifpc-game", "colour": "red"},
    {"n": 3},
])
def test_config_rejects(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)


def test_config_load(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg().to_dict()))
    assert ExperimentConfig.load(p) == cfg()
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(p)
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.json")


def test_wilson_matches_hand_formula():
    k, n, z = 37, 50, stats.norm.ppf(0.975)
    ph = k / n
    centre = (ph + z * z / (2 * n)) / (1 + z * z / n)
    half = z / (1 + z * z / n) * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n))
    lo, hi = wilson(k, n)
    assert lo == pytest.approx(centre - half, abs=1e-12) and hi == pytest.approx(centre + half, abs=1e-12)
    assert wilson(0, 0) == (0.0, 1.0)
    assert proportion([True, False, True, True])["rate"] == 0.75
    assert mean_stderr([2.0]) == (2.0, 0.0)
    assert mean_stderr([1.0, 3.0]) == (2.0, 1.0)


@pytest.mark.parametrize("kind,extra", [
    ("ifpc-game", {}),
    ("nifpc", {"pirate": "random_consistent"}),
    ("attack", {"n": 4, "N": None, "ell": None, "sigma": None, "trials": 3}),
    ("privacy-attack", {"n": 4, "N": None, "ell": None, "sigma": None, "trials": 3}),
    ("real-vs-ideal", {"n": 4, "N": None, "ell": None, "sigma": None, "trials": 3, "scheme": "otp"}),
])
def test_outputs_byte_identical_and_aggregate_recomputes(tmp_path, kind, extra):
    c = cfg(kind=kind, **extra)
    run_experiment(c, tmp_path / "a")
    run_experiment(c, tmp_path / "b")
    for name in ("trials.jsonl", "summary.csv", "aggregate.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "timing.json").exists()
    trials = read_trials(tmp_path / "a" / "trials.jsonl")
    agg = json.loads((tmp_path / "a" / "aggregate.json").read_text())["aggregate"]
    assert json.loads(json.dumps(aggregate(trials))) == agg


def test_workers_do_not_change_results():
    c = cfg(trials=4)
    assert run_experiment(c, workers=2).trials == run_experiment(c, workers=1).trials


def test_real_vs_ideal_empirical_mean_identical():
    res = run_experiment(cfg(kind="real-vs-ideal", n=4, N=None, ell=None, sigma=None, trials=3))
    assert all(t["identical_transcripts"] for t in res.trials)
    assert res.aggregate["identical_transcripts"]["rate"] == 1.0


def test_constant_pirate_theta_rate_within_wilson_of_zeta():
    res = run_experiment(cfg(pirate="constant:1", N=40, ell=4000, sigma=1e9, trials=1))
    z = 3 / 8
    theta = res.trials[0]["theta_ell"]
    # +1 contradicts every user only on the p=0 special round; all-minus interior columns are negligible at N=40
    lo, hi = wilson(theta, 4000, 0.999)
    assert lo <= z <= hi


def test_lemma_rows_only_stated_xi_bound_fails(tmp_path):
    rows = list(lemmas.lemma_rows(tail_trials=2000))
    failed = {r.lemma for r in rows if not r.passed}
    assert failed == {"xi_expectation"}
    assert sum(not r.passed for r in rows) == 74
    total, bad = lemmas.write_csv(rows, tmp_path / "l.csv")
    assert (total, bad) == (len(rows), 74)
    assert (tmp_path / "l.csv").read_text().splitlines()[0] == "lemma,instance,lhs,rhs,margin,pass"


def test_calibrate_large_ell_feasible_against_constant():
    cell = cal.evaluate_cell(4, 40, 0.0, 0.1, 4000, 1.0, ["constant:1"], 20, 7)
    assert cell.feasible and cell.games == 20


def test_calibrate_repeatable_and_table_write(tmp_path):
    kw = dict(pirate_set=("dictator",), trials=10, base_seed=11)
    a = cal.calibrate([2], 0.0, 0.1, **kw)
    b = cal.calibrate([2], 0.0, 0.1, **kw)
    assert a == b
    path = cal.write_table([a], tmp_path / "t.json")
    table = json.loads(path.read_text())
    assert table["entries"] == [a]
    cal.write_table([dict(a, c1=9.0)], path)
    assert json.loads(path.read_text())["entries"][0]["c1"] == 9.0


def test_calibration_failure_reports_frontier():
    with pytest.raises(cal.CalibrationError) as exc:
        cal.minimal_cell(2, 0.0, 0.1, pirates=("majority",), trials=10, max_steps=0)
    assert exc.value.frontier


def test_fitted_exponent_examples():
    assert cal.fitted_exponent([4, 8, 16], [16, 64, 256]) == pytest.approx(2.0)
    assert cal.fitted_exponent([1, 2], [3, 3]) == pytest.approx(0.0, abs=1e-12)
