"""Seeded experiment drivers shared by the CLI, the scripts and the tests.

Reproducibility contract: every random draw comes from
``substream(master_seed, *keys)``, a generator seeded by
``SeedSequence(entropy=master_seed, spawn_key=keys)``.  Protocol trial ``t``
uses keys ``(0, t)``; the prover's bundle uses ``(1,)``; sweep cells use
``(2, N, strategy_index)`` for the bundle and ``(3, N, strategy_index, t)``
for trials, so every beta at a given ``(N, strategy)`` sees the same streams.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Sequence

import numpy as np

from .analysis import (
    PreconditionError,
    check_matching_theorem,
    random_matching,
    wilson_interval,
)
from .merlin import (
    WitnessBundle,
    adversary_concentrated,
    adversary_nonidentical,
    adversary_phased,
    default_K,
    honest_bundle,
)
from .quantum_state import StateVector, distance_to_proper, proper_state
from .sat_core import TwoOutOfFourInstance
from .verifier import (
    BRANCHES,
    BlockPartition,
    TestReport,
    _collisions,
    clause_projections,
    partition_blocks,
    run_protocol,
    uniformity_outcomes,
)

STRATEGIES = ("honest", "concentrated", "phased", "nonidentical")
MATCHING_FAMILIES = ("concentrated", "phased", "nonidentical")


def substream(master: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=int(master), spawn_key=tuple(keys)))


# Prover strategies ----------------------------------------------------------------

def build_bundle(strategy: str, assignment: Sequence[int], K: int, rng: np.random.Generator,
                 sigma: float = math.pi / 2, support_frac: float = 0.5,
                 delta: float = 0.05) -> WitnessBundle:
    N = len(assignment)
    if strategy == "honest":
        return honest_bundle(assignment, K)
    if strategy == "concentrated":
        size = max(1, int(round(support_frac * N)))
        S = rng.choice(N, size=size, replace=False)
        return adversary_concentrated(S, K, rng, N)
    if strategy == "phased":
        return adversary_phased(assignment, sigma, K, rng)
    if strategy == "nonidentical":
        return adversary_nonidentical(proper_state(assignment), delta, K, rng)
    raise ValueError(f"unknown strategy {strategy!r}")


# Matching-theorem families --------------------------------------------------------

NONIDENTICAL_BASE_DELTA = 0.3


def matching_family_state(family: str, N: int, rng: np.random.Generator) -> StateVector:
    """A single far-from-proper state from one of the adversary families.

    ``concentrated``: half support; ``phased``: sigma = pi/2;
    ``nonidentical``: the perturbed witness farthest from a random proper base
    among 16 drawn at overlap threshold ``1 - NONIDENTICAL_BASE_DELTA``.
    """
    a = rng.integers(0, 2, size=N)
    if family == "concentrated":
        return build_bundle("concentrated", a, 1, rng).witnesses[0]
    if family == "phased":
        return build_bundle("phased", a, 1, rng).witnesses[0]
    if family == "nonidentical":
        base = proper_state(a)
        b = adversary_nonidentical(base, NONIDENTICAL_BASE_DELTA, 16, rng)
        ov = [abs(np.vdot(base.amps, w.amps)) for w in b.witnesses[1:]]
        return b.witnesses[1 + int(np.argmin(ov))]
    raise ValueError(f"unknown family {family!r}")


def load_matching_defaults() -> dict:
    text = resources.files("qmasat").joinpath("data/matching_defaults.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class MatchingRun:
    family: str
    N: int
    eps: float
    distance: float
    frequency: float
    wilson_low: float
    trials: int


def run_matching_check(family: str, N: int, trials: int, seed: int,
                       defaults: dict | None = None) -> MatchingRun:
    cfg = defaults if defaults is not None else load_matching_defaults()
    rng = substream(seed, 4, N, MATCHING_FAMILIES.index(family))
    s = matching_family_state(family, N, rng)
    eps = cfg["eps"][family]
    r = check_matching_theorem(s, eps, cfg["c"], cfg["d"], trials, rng)
    return MatchingRun(family, N, eps, r.distance, r.frequency, r.wilson_low, trials)


# Protocol trials ------------------------------------------------------------------

def run_protocol_trials(bundle: WitnessBundle, inst: TwoOutOfFourInstance, trials: int,
                        seed: int, part: BlockPartition | None = None) -> list[TestReport]:
    part = part if part is not None else partition_blocks(inst)
    proj = clause_projections(bundle.witnesses[0], inst)
    return [run_protocol(bundle, inst, part, substream(seed, 0, t), proj) for t in range(trials)]


def summarize(reports: Sequence[TestReport]) -> dict:
    out = {"trials": len(reports)}
    acc = sum(r.accept for r in reports)
    lo, hi = wilson_interval(acc, len(reports))
    out["acceptance"] = {"rate": acc / max(1, len(reports)), "accepts": acc,
                         "wilson95": [lo, hi]}
    per = {}
    for b in BRANCHES:
        rs = [r for r in reports if r.test == b]
        a = sum(r.accept for r in rs)
        lo, hi = wilson_interval(a, len(rs))
        per[b] = {"runs": len(rs), "accepts": a,
                  "rate": a / len(rs) if rs else None, "wilson95": [lo, hi]}
    out["branches"] = per
    return out


# Uniformity sweep -----------------------------------------------------------------

SWEEP_COLUMNS = ("N", "beta", "K", "strategy", "trials", "rejections", "rejection_rate",
                 "collision_freq", "disagreement_given_collision")
SWEEP_STRATEGIES = ("honest", "concentrated", "phased")


def sweep_cell(N: int, beta: float, strategy: str, trials: int, seed: int) -> dict:
    si = SWEEP_STRATEGIES.index(strategy)
    K = default_K(N, beta)
    brng = substream(seed, 2, N, si)
    a = brng.integers(0, 2, size=N)
    # one witness replicated K times; its stream ignores beta, so cells differing only in beta share it
    bundle = build_bundle(strategy, a, 1, brng)
    bundle = WitnessBundle(bundle.witnesses * K, bundle.strategy, bundle.params)
    rej = coll = 0
    for t in range(trials):
        rng = substream(seed, 3, N, si, t)
        m = random_matching(N, rng)
        c, d = _collisions(uniformity_outcomes(bundle, m, rng))
        coll += bool(c)
        rej += bool(d)
    return {"N": N, "beta": beta, "K": K, "strategy": strategy, "trials": trials,
            "rejections": rej, "rejection_rate": rej / trials,
            "collision_freq": coll / trials,
            "disagreement_given_collision": (rej / coll) if coll else 0.0}


def run_sweep(Ns: Sequence[int], betas: Sequence[float], strategies: Sequence[str],
              trials: int, seed: int) -> list[dict]:
    return [sweep_cell(N, beta, s, trials, seed) for N in Ns for s in strategies for beta in betas]


# Lemma battery --------------------------------------------------------------------

@dataclass(frozen=True)
class LemmaResult:
    name: str
    status: str          # "pass" | "fail" | "skip"
    detail: dict

    def to_record(self) -> dict:
        return {"name": self.name, "status": self.status, "detail": self.detail}


def _guard(name: str, fn: Callable[[], tuple[bool, dict]]) -> LemmaResult:
    try:
        ok, detail = fn()
    except PreconditionError as e:
        return LemmaResult(name, "skip", {"precondition": str(e)})
    return LemmaResult(name, "pass" if ok else "fail", detail)


def lemma_battery(seed: int, scale: float = 1.0, matching: dict | None = None
                  ) -> list[LemmaResult]:
    """Run every small-scale lemma check; ``scale`` multiplies trial counts.

    ``matching`` optionally overrides the matching-theorem defaults file.
    """
    from . import lemma_checks as lc

    n = lambda k: max(10, int(k * scale))
    checks = [
        ("gadget_exhaustive", lambda: lc.gadget_check()),
        ("clause_rejection_patterns", lambda: lc.clause_pattern_check()),
        ("swaptest_bound", lambda: lc.swaptest_check(substream(seed, 5, 0), n(200))),
        ("closeprop", lambda: lc.closeprop_check(substream(seed, 5, 1), n(200))),
        ("implem", lambda: lc.implem_check(substream(seed, 5, 2), n(200))),
        ("heavy_light", lambda: lc.heavy_light_check(substream(seed, 5, 3), n(500))),
        ("geolem", lambda: lc.geolem_check(substream(seed, 5, 4), n(50))),
        ("condvar", lambda: lc.condvar_check(substream(seed, 5, 5), n(2000))),
        ("unbalwrt", lambda: lc.unbalwrt_check(substream(seed, 5, 6), n(2000))),
        ("epsclose", lambda: lc.epsclose_check(substream(seed, 5, 7), n(2000))),
        ("sortlem", lambda: lc.sortlem_check(substream(seed, 5, 8), n(2000))),
        ("birthday2_montecarlo", lambda: lc.birthday2_check(substream(seed, 5, 9), n(2000))),
        ("birthday2_proof_chain", lambda: lc.birthday2_chain_check(substream(seed, 5, 10))),
        ("birthday_uniform_minimizes", lambda: lc.bloom_check(substream(seed, 5, 11), n(200))),
        ("matching_theorem", lambda: lc.matching_check(seed, n(300), defaults=matching)),
        ("matching_theorem_proper_state", lambda: lc.matching_on_proper(substream(seed, 5, 12))),
        ("ef_ppt_equivalence", lambda: lc.ef_ppt_check(substream(seed, 5, 13), n(2000))),
        ("ef_convexity", lambda: lc.ef_convexity_check(substream(seed, 5, 14), n(500))),
        ("werner_threshold", lambda: lc.werner_check()),
        ("eflem", lambda: lc.eflem_check(substream(seed, 5, 15), n(30))),
        ("2nlem", lambda: lc.twon_check(substream(seed, 5, 16), n(300))),
        ("onesidedamp", lambda: lc.onesided_check(substream(seed, 5, 17))),
        ("k_to_two", lambda: lc.ktotwo_check(substream(seed, 5, 18), n(20000))),
        ("sym_to_plain", lambda: lc.symlem_check(substream(seed, 5, 19), n(20000))),
    ]
    return [_guard(name, fn) for name, fn in checks]
