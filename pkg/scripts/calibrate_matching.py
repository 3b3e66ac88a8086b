"""Calibrate the matching-theorem constants (c, d) and per-family epsilon floors.

For every adversary family and N in {64, 256, 1024} this draws states over
several master seeds, checks each is epsilon-far at the family floor, and
records largeness / eps^4 of the c*eps^8-unbalanced set over random matchings.
d is set to a safety fraction of the worst low quantile observed.

    python3 scripts/calibrate_matching.py --out src/qmasat/data/matching_defaults.json
"""
from __future__ import annotations

import argparse
import json

import numpy as np

from qmasat.analysis import random_matching, unbalanced_set
from qmasat.experiments import MATCHING_FAMILIES, matching_family_state, substream
from qmasat.quantum_state import distance_to_proper

EPS_FLOORS = {"concentrated": 0.70, "phased": 0.60, "nonidentical": 0.55}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--c", type=float, default=1.0)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--matchings", type=int, default=200)
    ap.add_argument("--quantile", type=float, default=0.01)
    ap.add_argument("--safety", type=float, default=0.5)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    worst = np.inf
    rows = []
    for fi, fam in enumerate(MATCHING_FAMILIES):
        eps = EPS_FLOORS[fam]
        for N in (64, 256, 1024):
            ratios, dmin = [], np.inf
            for seed in range(args.seeds):
                rng = substream(seed, 4, N, fi)
                s = matching_family_state(fam, N, rng)
                dist = distance_to_proper(s)
                dmin = min(dmin, dist)
                if dist < eps:
                    raise SystemExit(f"{fam} N={N} seed={seed}: distance {dist:.4f} below floor {eps}")
                mrng = np.random.default_rng([seed, N, fi, 99])
                for _ in range(args.matchings):
                    _, large = unbalanced_set(s, random_matching(N, mrng), args.c * eps ** 8)
                    ratios.append(large / eps ** 4)
            q = float(np.quantile(ratios, args.quantile))
            worst = min(worst, q)
            rows.append((fam, N, dmin, q))
            print(f"{fam:13s} N={N:5d} min_dist={dmin:.4f} q{args.quantile:g}(largeness/eps^4)={q:.4f}")
    d = round(args.safety * worst, 3)
    doc = {"c": args.c, "d": d, "eps": EPS_FLOORS,
           "calibration": {"quantile": args.quantile, "safety": args.safety,
                           "worst_quantile_ratio": round(worst, 6), "seeds": args.seeds,
                           "matchings_per_state": args.matchings}}
    print(json.dumps(doc, indent=2, sort_keys=True))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


if __name__ == "__main__":
    main()
