"""Witness bundles: the honest prover and parameterized cheating families."""
from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .quantum_state import StateError, StateVector, proper_state

BUNDLE_FORMAT = "qmasat-bundle/1"


@dataclass(frozen=True)
class WitnessBundle:
    """K unentangled pure witnesses of a common dimension.

    Unentanglement is structural: a bundle is a list of pure states, and the
    joint state is their tensor product.
    """

    witnesses: tuple[StateVector, ...]
    strategy: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        ws = tuple(self.witnesses)
        if not ws:
            raise StateError("a bundle needs K >= 1 witnesses")
        if len({w.dim for w in ws}) != 1:
            raise StateError("witnesses in a bundle must share one dimension")
        object.__setattr__(self, "witnesses", ws)

    @functools.cached_property
    def amps(self) -> np.ndarray:
        """The ``(K, N)`` amplitude matrix, computed once."""
        A = np.stack([w.amps for w in self.witnesses])
        A.flags.writeable = False
        return A

    @property
    def K(self) -> int:
        return len(self.witnesses)

    @property
    def N(self) -> int:
        return self.witnesses[0].dim

    def manifest(self) -> dict:
        return {"format": BUNDLE_FORMAT, "K": self.K, "N": self.N,
                "strategy": self.strategy, "params": self.params}

    def dumps(self) -> str:
        doc = self.manifest()
        doc["states"] = [[[float(z.real), float(z.imag)] for z in w.amps] for w in self.witnesses]
        return json.dumps(doc, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "WitnessBundle":
        doc = json.loads(text)
        if doc.get("format") != BUNDLE_FORMAT:
            raise StateError(f"unsupported bundle format {doc.get('format')!r}")
        ws = tuple(StateVector(np.array([complex(r, i) for r, i in st])) for st in doc["states"])
        if len(ws) != doc["K"] or ws[0].dim != doc["N"]:
            raise StateError("manifest K/N disagree with the stored states")
        return cls(ws, doc["strategy"], doc["params"])


def default_K(N: int, beta: float = 2.0) -> int:
    return max(1, math.ceil(beta * math.sqrt(N)))


def honest_bundle(a: Sequence[int], K: int) -> WitnessBundle:
    if K < 1:
        raise StateError("K must be at least 1")
    psi = proper_state(a)
    return WitnessBundle((psi,) * K, "honest", {"K": K})


def adversary_concentrated(support: Sequence[int], K: int, rng: np.random.Generator,
                           N: int) -> WitnessBundle:
    """K copies of a state uniform in magnitude on ``support`` with random signs."""
    S = np.unique(np.asarray(support, dtype=np.int64))
    if S.size == 0:
        raise StateError("support must be nonempty")
    if S[0] < 0 or S[-1] >= N:
        raise StateError("support indices out of range")
    amps = np.zeros(N, dtype=np.complex128)
    amps[S] = np.where(rng.random(S.size) < 0.5, 1.0, -1.0) / math.sqrt(S.size)
    phi = StateVector(amps)
    return WitnessBundle((phi,) * K, "concentrated", {"support_size": int(S.size), "K": K})


def adversary_phased(a: Sequence[int], sigma: float, K: int,
                     rng: np.random.Generator) -> WitnessBundle:
    """K copies of ``proper(a)`` with Gaussian phase noise of width ``sigma`` per amplitude."""
    if sigma < 0:
        raise StateError("sigma must be nonnegative")
    base = proper_state(a).amps
    theta = rng.normal(0.0, sigma, size=base.size) if sigma > 0 else np.zeros(base.size)
    phi = StateVector(base * np.exp(1j * theta))
    return WitnessBundle((phi,) * K, "phased", {"sigma": float(sigma), "K": K})


def adversary_nonidentical(base: StateVector, delta: float, K: int, rng: np.random.Generator,
                           budget: int = 1000) -> WitnessBundle:
    """Witness 1 is ``base``; the rest are perturbations with overlap at least ``1 - delta``.

    Each perturbation adds a random complex Gaussian direction with length
    drawn uniformly up to the value that would give overlap exactly
    ``1 - delta`` for an orthogonal direction, renormalizes, and is kept only
    if the measured overlap clears the threshold.
    """
    if not 0.0 <= delta <= 1.0:
        raise StateError("delta must lie in [0, 1]")
    if delta == 0.0:
        return WitnessBundle((base,) * K, "nonidentical", {"delta": 0.0, "K": K})
    tmax = 10.0 if delta >= 1.0 else math.sqrt(1.0 / (1.0 - delta) ** 2 - 1.0)
    out = [base]
    tries = 0
    while len(out) < K:
        tries += 1
        if tries > budget * K:
            raise RuntimeError(f"rejection budget exceeded for delta={delta}")
        g = rng.normal(size=base.dim) + 1j * rng.normal(size=base.dim)
        g /= np.linalg.norm(g)
        v = base.amps + rng.uniform(0.0, tmax) * g
        w = StateVector.normalized(v)
        if abs(np.vdot(base.amps, w.amps)) >= 1.0 - delta:
            out.append(w)
    return WitnessBundle(tuple(out), "nonidentical", {"delta": float(delta), "K": K})


def min_overlap(b: WitnessBundle) -> float:
    w0 = b.witnesses[0].amps
    return min(abs(np.vdot(w0, w.amps)) for w in b.witnesses)
