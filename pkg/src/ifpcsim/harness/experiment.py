"""Run a configured experiment and write deterministic outputs.

Trial ``k`` uses seed ``base_seed + k``.  ``trials.jsonl``, ``summary.csv``
and ``aggregate.json`` depend only on the config, so two runs produce
byte-identical files.  Wall-clock times go to ``timing.json``.
"""
from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .. import attack, crypto, ifpc, nifpc
from ..pirates import parse_pirate
from ..rng import stream, trial_seed
from ..sq import parse_oracle
from . import lemmas
from .config import ExperimentConfig
from .stats import ks_pvalue, mean_stderr, proportion


@dataclass
class TrialSummary:
    trial: int
    seed: int
    theta_ell: int
    psi_ell: int
    coalition_size: int
    coalition_fully_accused: bool
    soundness_holds: bool
    completeness_holds: bool
    recovered_fraction: float
    sym_diff: int | None = None
    ideal_theta_ell: int | None = None
    ideal_psi_ell: int | None = None
    identical_transcripts: bool | None = None


NUMERIC = ("theta_ell", "psi_ell", "recovered_fraction", "sym_diff", "ideal_theta_ell", "ideal_psi_ell")
FLAGS = ("coalition_fully_accused", "soundness_holds", "completeness_holds", "identical_transcripts")


def params_for(cfg: ExperimentConfig) -> ifpc.IfpcParams:
    if cfg.kind in ("attack", "real-vs-ideal"):
        factor = None if cfg.N is None else cfg.N // cfg.n
        if cfg.N is not None and cfg.N % cfg.n:
            raise ValueError("attack universes need N to be a multiple of n")
        return attack.attack_params(cfg.n, cfg.beta, cfg.delta, cfg.mode, factor, cfg.sigma, cfg.ell)
    if cfg.kind == "privacy-attack":
        return attack.privacy_params(cfg.n, cfg.beta, cfg.delta, cfg.mode, cfg.sigma, cfg.ell)
    N = 10 * cfg.n if cfg.N is None else cfg.N
    delta = 0.1 if cfg.delta is None else cfg.delta
    return ifpc.derive_params(cfg.n, N, cfg.beta, delta, cfg.mode, sigma=cfg.sigma, ell=cfg.ell)


def _coalition(cfg, params, seed):
    size = cfg.n if cfg.coalition_size is None else cfg.coalition_size
    rng = stream(seed, "coalition")
    return tuple(sorted(rng.choice(params.N, size=size, replace=False).tolist()))


def _scheme(cfg, params):
    return crypto.otp_scheme(params.ell) if cfg.scheme == "otp" else crypto.prf_pad_scheme()


def _record_length(cfg, params):
    return attack.default_record_length(params.N) if cfg.d is None else cfg.d


def _ifpc_trial(cfg, params, k, seed):
    coalition = _coalition(cfg, params, seed)
    t = ifpc.run_game(params, coalition, parse_pirate(cfg.pirate, coalition), seed=seed)
    out = ifpc.evaluate_outcome(t)
    return TrialSummary(k, seed, out.theta, out.psi, len(coalition), out.coalition_fully_accused,
                        out.soundness_holds, out.completeness_holds,
                        len(t.accused & set(coalition)) / len(coalition) if coalition else 1.0)


def _nifpc_trial(cfg, params, k, seed):
    coalition = _coalition(cfg, params, seed)
    book = nifpc.gen(params, stream(seed, "tracer"))
    pirate = parse_pirate(cfg.pirate, coalition)
    pirate.reset(params.ell, stream(seed, "pirate"))
    members = np.asarray(coalition, dtype=np.int64)
    answers = pirate.respond_block(members, book.matrix[members].T, np.arange(1, params.ell + 1))
    accused = nifpc.trace(book, answers)
    theta = nifpc.consistency_violations(book, answers)
    psi = len(accused - set(coalition))
    out = ifpc.judge(theta, psi, params.ell, params.N, len(coalition), params.beta, params.delta,
                     set(coalition) <= accused)
    return TrialSummary(k, seed, theta, psi, len(coalition), out.coalition_fully_accused, out.soundness_holds,
                        out.completeness_holds, len(accused & set(coalition)) / len(coalition) if coalition else 1.0)


def _report_summary(k, seed, rep):
    complete = rep.theta_ell > rep.params.beta * rep.L
    return TrialSummary(k, seed, rep.theta_ell, rep.psi_ell, len(rep.S), rep.sample_recovered, rep.soundness_holds,
                        complete, rep.recovered_fraction, getattr(rep, "sym_diff", None))


def _attack_trial(cfg, params, k, seed):
    rep = attack.run_attack(parse_oracle(cfg.oracle), params.n, _record_length(cfg, params), params,
                            _scheme(cfg, params), seed)
    return _report_summary(k, seed, rep)


def _privacy_trial(cfg, params, k, seed):
    rep = attack.run_privacy_attack(parse_oracle(cfg.oracle), params.n, _record_length(cfg, params), params,
                                    _scheme(cfg, params), seed)
    if not rep.set_identity_holds():
        raise AssertionError(f"set identity violated in trial {k}")
    return _report_summary(k, seed, rep)


def _real_ideal_trial(cfg, params, k, seed):
    d = _record_length(cfg, params)
    real = attack.run_attack(parse_oracle(cfg.oracle), params.n, d, params, _scheme(cfg, params), seed)
    ideal = attack.run_ideal_attack(parse_oracle(cfg.oracle), params.n, d, params, _scheme(cfg, params), seed)
    s = _report_summary(k, seed, real)
    s.ideal_theta_ell, s.ideal_psi_ell = ideal.theta_ell, ideal.psi_ell
    s.identical_transcripts = bool(np.array_equal(real.rounded, ideal.rounded)
                                   and np.array_equal(real.answers, ideal.answers) and real.T == ideal.T)
    return s


_RUNNERS = {"ifpc-game": _ifpc_trial, "nifpc": _nifpc_trial, "attack": _attack_trial,
            "privacy-attack": _privacy_trial, "real-vs-ideal": _real_ideal_trial}


def run_trial(cfg: ExperimentConfig, k: int) -> tuple[TrialSummary, float]:
    params = params_for(cfg)
    seed = trial_seed(cfg.base_seed, k)
    t0 = time.perf_counter()
    summary = _RUNNERS[cfg.kind](cfg, params, k, seed)
    return summary, time.perf_counter() - t0


def aggregate(trials: list[dict]) -> dict:
    """Means, standard errors and Wilson intervals over per-trial records."""
    out = {"trials": len(trials)}
    for key in NUMERIC:
        vals = [t[key] for t in trials if t.get(key) is not None]
        if vals:
            mean, se = mean_stderr(vals)
            out[key] = {"mean": mean, "stderr": se}
    for key in FLAGS:
        vals = [t[key] for t in trials if t.get(key) is not None]
        if vals:
            out[key] = proportion(vals)
    tracer_wins = [t["soundness_holds"] and t["completeness_holds"] for t in trials]
    out["tracer_wins"] = proportion(tracer_wins)
    if trials and trials[0].get("ideal_theta_ell") is not None:
        out["ks_pvalue_theta"] = ks_pvalue([t["theta_ell"] for t in trials], [t["ideal_theta_ell"] for t in trials])
        out["ks_pvalue_psi"] = ks_pvalue([t["psi_ell"] for t in trials], [t["ideal_psi_ell"] for t in trials])
    return out


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    params: dict | None
    trials: list
    aggregate: dict
    runtimes: list


def run_experiment(cfg: ExperimentConfig, out_dir=None, workers: int = 1) -> ExperimentResult:
    cfg.validate()
    out_dir = out_dir if out_dir is not None else cfg.out_dir
    if cfg.kind == "verify-lemmas":
        return _run_lemmas(cfg, out_dir)
    params = params_for(cfg)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_trial, [cfg] * cfg.trials, range(cfg.trials)))
    else:
        results = [run_trial(cfg, k) for k in range(cfg.trials)]
    trials = [asdict(s) for s, _ in results]
    runtimes = [rt for _, rt in results]
    agg = aggregate(trials)
    result = ExperimentResult(cfg, params.to_dict(), trials, agg, runtimes)
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result


def _run_lemmas(cfg, out_dir):
    rows = list(lemmas.lemma_rows(seed=cfg.base_seed))
    by_lemma = {}
    for r in rows:
        ok, tot = by_lemma.get(r.lemma, (0, 0))
        by_lemma[r.lemma] = (ok + r.passed, tot + 1)
    agg = {"rows": len(rows), "failed": sum(not r.passed for r in rows),
           "by_lemma": {k: {"passed": v[0], "total": v[1]} for k, v in sorted(by_lemma.items())}}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lemmas.write_csv(rows, out / "lemmas.csv")
        (out / "aggregate.json").write_text(json.dumps(agg, indent=2, sort_keys=True) + "\n")
    return ExperimentResult(cfg, None, [asdict(r) for r in rows], agg, [])


def write_outputs(result: ExperimentResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "trials.jsonl").open("w") as fh:
        for t in result.trials:
            fh.write(json.dumps(t, sort_keys=True) + "\n")
    keys = list(result.trials[0]) if result.trials else []
    with (out / "summary.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        w.writerows(result.trials)
    # the output location does not affect results, so it stays out of the record
    config = {k: v for k, v in result.config.to_dict().items() if k != "out_dir"}
    meta = {"config": config, "params": result.params, "aggregate": result.aggregate}
    (out / "aggregate.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    (out / "timing.json").write_text(json.dumps({"runtime_s": result.runtimes}) + "\n")


def read_trials(path) -> list[dict]:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]
