"""Run the statistical-query attack against an honest and a noisy oracle.

The empirical mean answers every query exactly on its sample, so the tracer
ends up accusing the whole sample.  A heavily noised oracle escapes tracing
only by giving answers that are useless.
"""
from ifpcsim import attack, sq
from ifpcsim.crypto import prf_pad_scheme

prm = attack.attack_params(8)
d = attack.default_record_length(prm.N)
print(f"n=8 sample out of N={prm.N}, record length d={d}, ell={prm.ell}")

for oracle in (sq.empirical_mean_oracle(), sq.gaussian_noise_oracle(2.0)):
    rep = attack.run_attack(oracle, 8, d, prm, prf_pad_scheme(), 11)
    print(f"{type(oracle).__name__:>14}: rounds={rep.L} sample recovered={rep.sample_recovered} "
          f"false accusations={rep.psi_ell} accurate={rep.accurate(0.99)}")

rep = attack.run_privacy_attack(sq.empirical_mean_oracle(), 8, attack.default_record_length(16),
                                attack.privacy_params(8), prf_pad_scheme(), 11)
print(f"privacy attack: |x sym-diff x'| = {rep.sym_diff} of n=8 (halted early: {rep.halted_early})")
