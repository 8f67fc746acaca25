import json
import math

import numpy as np
import pytest

from ifpcsim import attack, sq
from ifpcsim.crypto import otp_scheme, prf_pad_scheme
from ifpcsim.ifpc import Mode


def small():
    prm = attack.attack_params(4)
    return prm, attack.default_record_length(prm.N)


def test_attack_params_defaults():
    prm = attack.attack_params(8)
    assert prm.N == 80 and prm.delta == 0.1 and prm.mode is Mode.SCALED
    # delta is raised until delta (N - n) >= 5
    assert attack.attack_params(2).delta == pytest.approx(5 / 18)
    paper = attack.attack_params(1, mode="paper")
    assert paper.N == 2000 and paper.delta == 1 / 1000
    pv = attack.privacy_params(16)
    assert pv.N == 32 and pv.delta == 1 / 32
    assert attack.privacy_params(2, mode="paper").delta == 1 / 20000
    assert attack.default_record_length(80) == 7 + 32


def test_setup_checks():
    prm, d = small()
    with pytest.raises(ValueError):
        attack.run_attack(sq.empirical_mean_oracle(), 5, d, prm, prf_pad_scheme(), 0)
    with pytest.raises(ValueError):
        attack.run_attack(sq.empirical_mean_oracle(), 4, 6, prm, prf_pad_scheme(), 0)
    with pytest.raises(ValueError):
        attack.run_privacy_attack(sq.empirical_mean_oracle(), 4, d, prm, prf_pad_scheme(), 0)


@pytest.mark.parametrize("scheme", ["prf", "otp"])
def test_query_honesty_and_population_bound(scheme):
    prm, d = small()
    sch = prf_pad_scheme() if scheme == "prf" else otp_scheme(prm.ell)
    # verify=True decrypts every record each round and compares with the plaintext
    rep = attack.run_attack(sq.empirical_mean_oracle(), 4, d, prm, sch, 3, verify=True)
    t = rep.transcript
    col_mean = np.where(t.bits, 1, -1).mean(axis=1)
    for j in range(1, rep.L + 1):
        out = int(((t.accused_round > 0) & (t.accused_round < j)).sum())
        assert abs(rep.population[j - 1] - col_mean[j - 1]) <= out / rep.N + 1e-15


def test_rounding_ties_to_plus():
    prm, d = small()
    rep = attack.run_attack(sq.empirical_mean_oracle(), 4, d, prm, prf_pad_scheme(), 4)
    assert np.array_equal(rep.rounded, np.where(rep.answers >= 0, 1, -1))
    assert (rep.answers == 0).any()


def test_empirical_mean_recovers_sample():
    prm, d = small()
    reps = [attack.run_attack(sq.empirical_mean_oracle(), 4, d, prm, prf_pad_scheme(), 10 + k) for k in range(10)]
    assert sum(r.sample_recovered and r.soundness_holds for r in reps) >= 9
    # exact on the sample, so the population error is what the attack forces
    assert all(r.sample_accurate(0.0) and not r.accurate(0.5) for r in reps)
    assert all(np.array_equal(r.answers, r.sample_values) for r in reps)


def test_constant_oracle_theta_rate_is_zeta():
    prm = attack.attack_params(4, ell=20_000)
    d = attack.default_record_length(prm.N)
    rep = attack.run_attack(sq.constant_oracle(1.0), 4, d, prm, prf_pad_scheme(), 5)
    z = prm.zeta
    slack = 4 * math.sqrt(z * (1 - z) / rep.L) + (1 - prm.alpha) ** prm.N
    assert abs(rep.theta_ell / rep.L - z) < slack


class CoinOracle(sq.SqOracle):
    """Ignores the query; answers a fresh uniform sign."""

    def answer(self, query):
        return float(self.rng.choice([-1.0, 1.0]))


def test_query_blind_oracle_is_sound():
    prm, d = small()
    reps = [attack.run_attack(CoinOracle(), 4, d, prm, prf_pad_scheme(), 20 + k) for k in range(20)]
    assert sum(r.soundness_holds for r in reps) >= 19
    assert np.mean([r.psi_ell for r in reps]) < prm.delta * (prm.N - prm.n)


class LoggingMean(sq.EmpiricalMean):
    """Empirical mean that records which records it decrypts."""

    def init(self, sample, rng):
        super().init(sample, rng)
        self.touched = set()

    def answer(self, query):
        log = []
        query._log = log
        out = super().answer(query)
        self.touched.update(log)
        return out


@pytest.mark.parametrize("scheme", ["prf", "otp"])
def test_sample_only_oracle_real_equals_ideal(scheme):
    prm, d = small()
    for seed in range(3):
        runs = []
        for fn in (attack.run_attack, attack.run_ideal_attack):
            o = LoggingMean()
            sch = prf_pad_scheme() if scheme == "prf" else otp_scheme(prm.ell)
            runs.append((fn(o, 4, d, prm, sch, seed), o.touched))
        (real, t_real), (ideal, t_ideal) = runs
        assert t_real <= real.S and t_ideal <= ideal.S
        assert real.S == ideal.S and real.mode == "real" and ideal.mode == "ideal"
        assert np.array_equal(real.answers, ideal.answers)
        assert np.array_equal(real.transcript.accused_round, ideal.transcript.accused_round)


class KeyGuesser(sq.SqOracle):
    """Decrypts non-sample ciphertexts under freshly guessed keys."""

    def __init__(self, scheme, lam):
        self.scheme, self.lam = scheme, lam

    def init(self, sample, rng):
        super().init(sample, rng)
        self.guesses = []

    def answer(self, query):
        others = np.flatnonzero(~np.isin(np.arange(query.excluded.size), self.sample.indices))
        keys = self.scheme.gen_keys(others.size, self.lam, self.rng)
        vals = self.scheme.dec_many(keys, query.table.tag[query.row, others], query.table.body[query.row, others])
        self.guesses.append(vals)
        return float(np.clip(vals.mean() * 4, -1, 1))


def test_guessed_keys_learn_nothing():
    prm = attack.attack_params(4, ell=3000, sigma=1e9)
    d = attack.default_record_length(prm.N)
    sch = prf_pad_scheme()
    o = KeyGuesser(sch, sq.key_length(d, prm.N))
    rep = attack.run_attack(o, 4, d, prm, sch, 6)
    outside = np.flatnonzero(~np.isin(np.arange(prm.N), rep.sample.indices))
    truth = np.where(rep.transcript.bits[:, outside], 1, -1).ravel()
    guess = np.concatenate(o.guesses)
    r = np.corrcoef(truth, guess)[0, 1]
    assert abs(r) < 4 / math.sqrt(truth.size)


def test_privacy_attack_identity_and_halting():
    prm = attack.privacy_params(4)
    d = attack.default_record_length(prm.N)
    for seed in range(5):
        rep = attack.run_privacy_attack(sq.empirical_mean_oracle(), 4, d, prm, prf_pad_scheme(), seed, verify=True)
        assert rep.set_identity_holds()
        assert not rep.guard_triggered
        assert len(rep.S) == 4
        assert np.array_equal(rep.rounded, np.where(rep.answers >= 0, 1, -1))
        if rep.halted_early:
            assert len(rep.T) > attack.HALT_FRACTION * 4 and rep.L < prm.ell
        size, blatant = attack.blatant_nonprivacy_metric(rep.x, rep.x_prime, 4)
        assert size == rep.sym_diff


def test_ideal_privacy_attack_runs():
    prm = attack.privacy_params(4)
    d = attack.default_record_length(prm.N)
    real = attack.run_privacy_attack(sq.empirical_mean_oracle(), 4, d, prm, prf_pad_scheme(), 1)
    ideal = attack.run_ideal_privacy_attack(sq.empirical_mean_oracle(), 4, d, prm, prf_pad_scheme(), 1)
    assert real.sym_diff == ideal.sym_diff and np.array_equal(real.answers, ideal.answers)


def test_blatant_metric_examples():
    assert attack.blatant_nonprivacy_metric({1, 2}, {1, 2}, 5) == (0, True)
    assert attack.blatant_nonprivacy_metric({1, 2}, {2, 3}, 5)[0] == 2
    assert attack.blatant_nonprivacy_metric({1, 2, 3}, {4, 5, 6}, 3) == (6, False)


def test_report_json(tmp_path):
    prm, d = small()
    rep = attack.run_attack(sq.empirical_mean_oracle(), 4, d, prm, prf_pad_scheme(), 2)
    rep.write_json(tmp_path / "r.json", transcript_path=tmp_path / "t.jsonl")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["theta_ell"] == rep.theta_ell and data["psi_ell"] == rep.psi_ell
    assert (tmp_path / "t.jsonl").exists()


def test_same_seed_same_report():
    prm, d = small()
    a = attack.run_attack(sq.gaussian_noise_oracle(0.3), 4, d, prm, prf_pad_scheme(), 8)
    b = attack.run_attack(sq.gaussian_noise_oracle(0.3), 4, d, prm, prf_pad_scheme(), 8)
    assert np.array_equal(a.answers, b.answers) and a.T == b.T
