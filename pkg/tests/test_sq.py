import math

import numpy as np
import pytest

from ifpcsim import sq
from ifpcsim.crypto import otp_scheme, prf_pad_scheme
from ifpcsim.rng import stream


def test_key_length():
    assert sq.key_length(40, 80) == 33
    with pytest.raises(ValueError):
        sq.key_length(7, 80)


def test_universe_samples():
    u = sq.make_universe(40, 20, prf_pad_scheme(), stream(0, "keys"))
    assert u.lam == 35 and u.record(3) == (3, u.keys[3])
    s = u.sample_subset(10, stream(0, "sample"))
    assert len(s.distinct) == 10 and list(s.indices) == sorted(s.indices)
    iid = u.sample_iid(50, stream(0, "sample"))
    assert len(iid) == 50 and iid[0] == (int(iid.indices[0]), u.keys[int(iid.indices[0])])
    sub = iid.subset([0, 2])
    assert sub.indices.tolist() == iid.indices[[0, 2]].tolist()


def test_finite_distribution_checks():
    with pytest.raises(ValueError):
        sq.FiniteDistribution([1, 2], np.array([0.5, 0.6]))
    d = sq.FiniteDistribution([1, -1, 1], np.array([0.25, 0.5, 0.25]))
    assert d.mean(sq.FunctionQuery(lambda x: x)) == pytest.approx(0.0)


def fixed_sample():
    return [1, -1, 1, 1, -1, 1, 1, 1]


def test_empirical_mean_exact():
    o = sq.empirical_mean_oracle()
    o.init(fixed_sample(), stream(0, "oracle"))
    assert o.answer(sq.FunctionQuery(lambda x: x)) == np.mean(fixed_sample())


def test_constant_oracle():
    o = sq.constant_oracle(0.0)
    o.init(fixed_sample(), stream(0, "oracle"))
    assert all(o.answer(sq.FunctionQuery(lambda x, k=k: x * k)) == 0 for k in (1, -1))
    with pytest.raises(ValueError):
        sq.constant_oracle(1.5)


def test_gaussian_zero_noise_and_clamp():
    q = sq.FunctionQuery(lambda x: x)
    g = sq.gaussian_noise_oracle(0.0)
    g.init(fixed_sample(), stream(0, "oracle"))
    assert g.answer(q) == np.mean(fixed_sample())
    big = sq.gaussian_noise_oracle(50.0)
    big.init(fixed_sample(), stream(1, "oracle"))
    vals = [big.answer(q) for _ in range(200)]
    assert all(-1 <= v <= 1 for v in vals) and {-1.0, 1.0} <= set(vals)
    with pytest.raises(ValueError):
        sq.gaussian_noise_oracle(-1)


def test_subsample_full_equals_mean():
    q = sq.FunctionQuery(lambda x: x)
    s = sq.subsample_oracle(len(fixed_sample()))
    s.init(fixed_sample(), stream(0, "oracle"))
    assert s.answer(q) == np.mean(fixed_sample())
    with pytest.raises(ValueError):
        sq.subsample_oracle(20).init(fixed_sample(), stream(0, "oracle"))


def test_parse_oracle():
    assert isinstance(sq.parse_oracle("empirical_mean"), sq.EmpiricalMean)
    assert sq.parse_oracle("gaussian_noise:2").noise_sd == 2.0
    assert sq.parse_oracle("subsample:4").t == 4
    assert sq.parse_oracle("constant:-0.5").v == -0.5
    for bad in ("subsample", "psychic"):
        with pytest.raises(ValueError):
            sq.parse_oracle(bad)


class Broken(sq.SqOracle):
    def __init__(self, value):
        self.value = value

    def answer(self, query):
        if self.value is None:
            raise KeyError("boom")
        return self.value


def test_checked_answer():
    with pytest.raises(ValueError):
        sq.checked_answer(Broken(1.5), None, 3)
    with pytest.raises(ValueError):
        sq.checked_answer(Broken(math.nan), None, 3)
    with pytest.raises(RuntimeError, match="round 3"):
        sq.checked_answer(Broken(None), None, 3)
    assert sq.checked_answer(Broken(-1.0), None, 1) == -1.0


class FixedAnalyst:
    """Non-adaptive: query j is the j-th coordinate of a record."""

    def __init__(self, k, rng):
        records = [tuple(r) for r in rng.choice([-1, 1], size=(64, k))]
        self.distribution = sq.FiniteDistribution(records)

    def query(self, j, history):
        return sq.FunctionQuery(lambda x, j=j: x[j - 1])


def test_acc_game_hoeffding():
    """For non-adaptive queries, max error over k queries is O(sqrt(log k / n))."""
    k, n = 50, 400
    rng = stream(2, "sample")
    tr = sq.run_acc_game(sq.empirical_mean_oracle(), FixedAnalyst(k, rng), n, 8, k, rng)
    # Hoeffding for [-1, 1] values plus a union bound over k queries at level 0.001
    t = math.sqrt(2 * math.log(2 * k / 1e-3) / n)
    assert tr.k == k
    assert np.max(np.abs(tr.answers - tr.population)) <= t
    assert np.array_equal(tr.answers, tr.sample_values)
    assert sq.sample_accuracy_check(tr, 0.0, 0.0)


def make_tr(errors):
    errors = np.asarray(errors, float)
    return sq.AccTranscript(answers=errors, population=np.zeros_like(errors), sample_values=np.zeros_like(errors))


def test_accuracy_check_examples():
    assert sq.accuracy_check(make_tr(np.zeros(10)), 0.1, 0.0)
    assert not sq.accuracy_check(make_tr(np.full(10, 2.0)), 1.9, 0.5)
    # beta k = 2: two bad rounds leave 8 >= (1 - beta) k good ones
    assert sq.accuracy_check(make_tr([1] * 2 + [0] * 8), 0.5, 0.2)
    # beta k = 2.5, ceil = 3 bad rounds: 7 < 7.5 good ones
    assert not sq.accuracy_check(make_tr([1] * 3 + [0] * 7), 0.5, 0.25)


def test_gaussian_oracle_accuracy_frequency():
    k, n = 20, 50
    ok = 0
    for t in range(50):
        rng = stream(100 + t, "sample")
        tr = sq.run_acc_game(sq.gaussian_noise_oracle(0.1), FixedAnalyst(k, rng), n, 8, k, rng)
        ok += sq.sample_accuracy_check(tr, 0.5, 0.0)
    # P(|N(0, 0.1)| > 0.5) is about 6e-7 per answer
    assert ok == 50


def test_column_population_value():
    assert sq.column_population_value([1, 1, 1], []) == 1.0
    assert sq.column_population_value([1, -1, 1], [0, 1, 2]) == 0.0
    assert sq.column_population_value([1, 1, -1, -1], [0]) == -0.25
    assert sq.column_population_value([1, 1, -1, -1], np.array([True, False, False, False])) == -0.25


@pytest.mark.parametrize("scheme", [prf_pad_scheme(), otp_scheme(4)])
def test_stat_query_matches_plaintext(scheme):
    N = 12
    u = sq.make_universe(40, N, scheme, stream(3, "keys"))
    msgs = stream(3, "sample").choice([-1, 1], size=(3, N)).astype(np.int8)
    table = scheme.enc_table(u.keys, msgs, stream(3, "enc"))
    excluded = np.zeros(N, dtype=bool)
    excluded[[2, 7]] = True
    log = []
    q = sq.StatQuery(scheme, table, 1, excluded, _log=log)
    every = u.sample_of(np.arange(N))
    vals = q.evaluate_many(every)
    assert np.array_equal(vals, np.where(excluded, 0, msgs[1]))
    assert [q.evaluate(u.record(i)) for i in range(N)] == vals.tolist()
    assert log == list(range(N)) * 2
    assert sq.population_value(q, u) == sq.column_population_value(msgs[1], excluded)
    cache = {id(every): [every, None]}
    for row in range(3):
        cached = sq.StatQuery(scheme, table, row, excluded, _cache=cache).evaluate_many(every)
        assert np.array_equal(cached, np.where(excluded, 0, msgs[row]))
    assert cache[id(every)][1].shape == (3, N)
