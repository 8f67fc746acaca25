import json
import subprocess
import sys

import pytest

from ifpcsim.harness import cli

SUBCOMMANDS = ("params", "ifpc-game", "nifpc", "attack", "privacy-attack", "real-vs-ideal", "verify-lemmas",
               "calibrate", "scaling-study")


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("name", SUBCOMMANDS)
def test_subcommand_exists(name):
    with pytest.raises(SystemExit) as exc:
        cli.main([name, "--help"])
    assert exc.value.code == 0


def test_params(capsys):
    code, out, _ = run(capsys, "params", "--n", "4", "--mode", "scaled")
    prm = json.loads(out)
    assert code == 0 and prm["n"] == 4 and prm["N"] == 40
    code, out, _ = run(capsys, "params", "--kind", "privacy", "--n", "16")
    assert json.loads(out)["N"] == 32


def test_game_success_and_outputs(capsys, tmp_path):
    code, out, _ = run(capsys, "ifpc-game", "--n", "3", "--N", "12", "--ell", "200", "--sigma", "6",
                       "--trials", "3", "--seed", "9", "--pirate", "noisy_mean:0.5", "--out-dir", str(tmp_path))
    assert code == 0 and json.loads(out)["trials"] == 3
    assert {p.name for p in tmp_path.iterdir()} == {"trials.jsonl", "summary.csv", "aggregate.json", "timing.json"}


def test_config_file_and_override(capsys, tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"kind": "nifpc", "n": 2, "N": 8, "ell": 100, "sigma": 5.0, "trials": 5}))
    code, out, _ = run(capsys, "nifpc", "--config", str(path), "--trials", "2")
    assert code == 0 and json.loads(out)["trials"] == 2


def test_config_errors_exit_2(capsys, tmp_path):
    assert run(capsys, "ifpc-game", "--beta", "0.7")[0] == 2
    assert run(capsys, "attack", "--oracle", "psychic")[0] == 2
    assert run(capsys, "ifpc-game", "--config", str(tmp_path / "none.json"))[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "ifpc-game", "--config", str(bad))[0] == 2
    other = tmp_path / "other.json"
    other.write_text(json.dumps({"kind": "attack"}))
    assert run(capsys, "ifpc-game", "--config", str(other))[0] == 2


def test_verify_lemmas_exit_1_on_failed_rows(capsys, tmp_path):
    code, out, _ = run(capsys, "verify-lemmas", "--out-dir", str(tmp_path))
    agg = json.loads(out)
    assert code == 1 and agg["failed"] == 74
    assert agg["by_lemma"]["xi_expectation_repaired"]["passed"] == agg["by_lemma"]["xi_expectation_repaired"]["total"]
    assert (tmp_path / "lemmas.csv").exists()


def test_calibration_failure_exit_1(capsys, monkeypatch):
    def fail(*a, **k):
        raise cli.cal.CalibrationError("no feasible cell", [{"ell": 16}])

    monkeypatch.setattr(cli.cal, "calibrate", fail)
    code, _, err = run(capsys, "calibrate", "--n-grid", "2", "--quiet")
    assert code == 1 and "no feasible cell" in err


def test_scaling_study_small(capsys, tmp_path):
    code, out, _ = run(capsys, "scaling-study", "--n-grid", "1,2", "--pirates", "dictator", "--trials", "10",
                       "--quiet", "--out-dir", str(tmp_path))
    report = json.loads(out)
    assert code == 0 and len(report["rows"]) == 2 and "fitted_exponent" in report
    assert (tmp_path / "scaling.csv").exists()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ifpcsim", "params", "--n", "2"], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["n"] == 2
