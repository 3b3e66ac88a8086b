"""Store a reference rejection rate for the concentrated adversary on a sample instance.

The bundle is redrawn for every master seed, so the stored interval is the
envelope of per-seed Wilson intervals over a range of seeds.  The tests rerun
the configuration under a fresh seed and check that its Wilson interval
overlaps the envelope.

    python3 scripts/calibrate_simulate.py --out src/qmasat/data/simulate_calibration.json
"""
from __future__ import annotations

import argparse
import json
from importlib import resources

from qmasat.experiments import build_bundle, run_protocol_trials, substream, summarize
from qmasat.merlin import default_K
from qmasat.reduction import reduce_full
from qmasat.sat_core import brute_force_max_sat, loads_instance

INSTANCE = "unsat_small.cnf"


def calibrate(seed: int, trials: int, strategy: str = "concentrated", beta: float = 2.0) -> dict:
    text = resources.files("qmasat").joinpath(f"data/instances/{INSTANCE}").read_text()
    cert = reduce_full(loads_instance(text))
    _, a = brute_force_max_sat(cert.source)
    K = default_K(cert.target.num_vars, beta)
    bundle = build_bundle(strategy, cert.lift(a), K, substream(seed, 1))
    s = summarize(run_protocol_trials(bundle, cert.target, trials, seed))
    return {"instance": INSTANCE, "strategy": strategy, "beta": beta, "K": K, "seed": seed,
            "trials": trials, "rejection_rate": 1 - s["acceptance"]["rate"],
            "wilson95": [1 - s["acceptance"]["wilson95"][1], 1 - s["acceptance"]["wilson95"][0]]}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    runs = [calibrate(s, args.trials) for s in range(args.seeds)]
    doc = {k: runs[0][k] for k in ("instance", "strategy", "beta", "K", "trials")}
    doc["seeds"] = list(range(args.seeds))
    doc["rates"] = [r["rejection_rate"] for r in runs]
    doc["pooled_rate"] = sum(doc["rates"]) / len(runs)
    doc["envelope"] = [min(r["wilson95"][0] for r in runs), max(r["wilson95"][1] for r in runs)]
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    print(text, end="")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)


if __name__ == "__main__":
    main()
