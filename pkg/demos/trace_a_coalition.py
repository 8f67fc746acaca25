"""Play one interactive tracing game and narrate who gets caught.

    python demos/trace_a_coalition.py [pirate] [seed]
"""
import sys

from ifpcsim.ifpc import derive_params, evaluate_outcome, run_game
from ifpcsim.pirates import parse_pirate


def main(spec="majority", seed=1):
    prm = derive_params(8, 80, 0.0, 0.1, "scaled")
    coalition = (3, 17, 22, 40, 41, 58, 63, 79)
    print(f"N={prm.N} users, coalition of {len(coalition)}, ell={prm.ell}, sigma={prm.sigma:.1f}")
    t = run_game(prm, coalition, parse_pirate(spec, coalition), seed=seed)
    for i in sorted(t.accused, key=lambda u: t.accused_round[u]):
        tag = "pirate" if i in coalition else "INNOCENT"
        print(f"  round {int(t.accused_round[i]):6d}: user {i:2d} accused ({tag})")
    out = evaluate_outcome(t)
    print(f"inconsistent rounds theta={out.theta}, false accusations psi={out.psi}")
    print(f"sound={out.soundness_holds} complete={out.completeness_holds} "
          f"all pirates caught={out.coalition_fully_accused}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "majority", int(sys.argv[2]) if len(sys.argv) > 2 else 1)
