"""Arthur's side: block partition, Satisfiability / Symmetry / Uniformity
tests, and the composed three-branch protocol."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .analysis import random_matching
from .merlin import WitnessBundle
from .quantum_state import Matching, StateError, StateVector, swap_test, swap_test_prob
from .sat_core import TwoOutOfFourInstance

TINY_N_CAP = 16
TINY_K_CAP = 4
BRANCHES = ("satisfiability", "symmetry", "uniformity")


@dataclass(frozen=True)
class BlockPartition:
    blocks: tuple[tuple[int, ...], ...]

    @property
    def s(self) -> int:
        return len(self.blocks)


@dataclass(frozen=True)
class TestReport:
    accept: bool
    test: str
    detail: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "accept" if self.accept else "reject"

    def to_record(self) -> dict:
        return {"test": self.test, "verdict": self.verdict, "detail": self.detail}


def partition_blocks(inst: TwoOutOfFourInstance) -> BlockPartition:
    """Greedy colouring of the clause conflict graph in clause-index order."""
    colours_at: list[set[int]] = [set() for _ in range(inst.num_vars)]
    blocks: list[list[int]] = []
    for ci, clause in enumerate(inst.clauses):
        taken = set().union(*(colours_at[v] for v, _ in clause))
        col = next(k for k in itertools.count() if k not in taken)
        if col == len(blocks):
            blocks.append([])
        blocks[col].append(ci)
        for v, _ in clause:
            colours_at[v].add(col)
    return BlockPartition(tuple(tuple(b) for b in blocks))


def _clause_arrays(inst: TwoOutOfFourInstance) -> tuple[np.ndarray, np.ndarray]:
    var = np.array([[v for v, _ in c] for c in inst.clauses], dtype=np.int64).reshape(-1, 4)
    sign = np.array([[-1.0 if n else 1.0 for _, n in c] for c in inst.clauses]).reshape(-1, 4)
    return var, sign


def _check_dim(s: StateVector, inst: TwoOutOfFourInstance) -> None:
    if s.dim != inst.num_vars:
        raise StateError(f"state dim {s.dim} != instance num_vars {inst.num_vars}")


def clause_projections(s: StateVector, inst: TwoOutOfFourInstance) -> tuple[np.ndarray, np.ndarray]:
    """Per clause: (mass on its 4 coordinates, squared overlap with the rejecting vector).

    The satisfying subspace of a clause is the orthogonal complement, inside
    its 4 coordinates, of ``u = D (1,1,1,1)/2`` where ``D`` flips the sign of
    negated literals.
    """
    _check_dim(s, inst)
    if inst.m == 0:
        return np.zeros(0), np.zeros(0)
    var, sign = _clause_arrays(inst)
    a = s.amps[var]
    mass = (np.abs(a) ** 2).sum(axis=1)
    rej = np.abs((sign * a).sum(axis=1)) ** 2 / 4.0
    return mass, rej


def satisfiability_test_exact(s: StateVector, inst: TwoOutOfFourInstance,
                              part: BlockPartition) -> float:
    _check_dim(s, inst)
    if part.s == 0:
        return 1.0
    _, rej = clause_projections(s, inst)
    return float(1.0 - rej.sum() / part.s)


def satisfiability_test_exact_fraction(a: Sequence[int], inst: TwoOutOfFourInstance,
                                       part: BlockPartition) -> Fraction:
    """Exact rational acceptance probability for the proper state of ``a``.

    A clause with ``t`` true literals has ``<u|psi>^2 = (4 - 2t)^2 / (4N)``.
    """
    if len(a) != inst.num_vars:
        raise StateError("assignment length does not match the instance")
    if part.s == 0:
        return Fraction(1)
    N = inst.num_vars
    total = 0
    for clause in inst.clauses:
        t = sum(int(a[v]) ^ int(n) for v, n in clause)
        total += (4 - 2 * t) ** 2
    return 1 - Fraction(total, 4 * N * part.s)


def conditional_rejection(signs: Sequence[int], negs: Sequence[bool] = (False,) * 4) -> float:
    """Rejection probability given the outcome landed in a clause, for a
    clause-restricted state with the given +-1 amplitude signs."""
    x = np.asarray(signs, dtype=float)
    x = x / np.linalg.norm(x)
    d = np.where(np.asarray(negs), -1.0, 1.0)
    return float((d @ x / 2.0) ** 2)


def satisfiability_test(s: StateVector, inst: TwoOutOfFourInstance, part: BlockPartition,
                        rng: np.random.Generator,
                        projections: tuple[np.ndarray, np.ndarray] | None = None) -> TestReport:
    """Sampled test; ``projections`` may carry a cached :func:`clause_projections` result."""
    _check_dim(s, inst)
    if part.s == 0:
        return TestReport(True, "satisfiability", {"block": None, "clause": None})
    r = int(rng.integers(part.s))
    block = np.array(part.blocks[r], dtype=np.int64)
    mass, rej = projections if projections is not None else clause_projections(s, inst)
    u = rng.random()
    cum = np.cumsum(mass[block])
    k = int(np.searchsorted(cum, u, side="right"))
    if k >= block.size:
        return TestReport(True, "satisfiability", {"block": r, "clause": None})
    ci = int(block[k])
    p_rej = rej[ci] / mass[ci] if mass[ci] > 0 else 0.0
    accept = bool(rng.random() >= p_rej)
    return TestReport(accept, "satisfiability", {"block": r, "clause": ci})


def symmetry_test_prob(b: WitnessBundle) -> float:
    if b.K < 2:
        raise StateError("the Symmetry Test needs K >= 2")
    w = b.witnesses
    return float(np.mean([swap_test_prob(w[0], w[k]) for k in range(1, b.K)]))


def symmetry_test(b: WitnessBundle, rng: np.random.Generator) -> TestReport:
    if b.K < 2:
        raise StateError("the Symmetry Test needs K >= 2")
    k = int(rng.integers(1, b.K))
    w = b.witnesses
    ov = float(abs(np.vdot(w[0].amps, w[k].amps)) ** 2)
    return TestReport(swap_test(w[0], w[k], rng), "symmetry", {"k": k, "overlap_sq": ov})


def _bundle_distributions(b: WitnessBundle, m: Matching) -> np.ndarray:
    if b.N % 2:
        raise StateError("the Uniformity Test needs even N")
    if m.N != b.N:
        raise StateError("matching size does not match the bundle dimension")
    A = b.amps
    ai, aj = A[:, m.edges[:, 0]], A[:, m.edges[:, 1]]
    P = np.stack([np.abs(ai + aj) ** 2 / 2, np.abs(ai - aj) ** 2 / 2], axis=2)
    return P.reshape(b.K, -1)


def uniformity_outcomes(b: WitnessBundle, m: Matching, rng: np.random.Generator
                        ) -> np.ndarray:
    """One outcome per witness, encoded ``2 * edge + (0 for +, 1 for -)``."""
    P = _bundle_distributions(b, m)
    cdf = np.cumsum(P, axis=1)
    u = rng.random(b.K) * cdf[:, -1]
    idx = (cdf <= u[:, None]).sum(axis=1)
    return np.minimum(idx, P.shape[1] - 1)


def _collisions(outcomes: np.ndarray) -> tuple[list[int], list[int]]:
    edges = outcomes // 2
    uniq, counts = np.unique(edges, return_counts=True)
    coll = [int(e) for e in uniq[counts >= 2]]
    dis = [e for e in coll if np.unique(outcomes[edges == e] % 2).size == 2]
    return coll, dis


def uniformity_test(b: WitnessBundle, rng: np.random.Generator,
                    matching: Matching | None = None) -> TestReport:
    m = matching if matching is not None else random_matching(b.N, rng)
    out = uniformity_outcomes(b, m, rng)
    coll, dis = _collisions(out)
    as_pair = lambda e: [int(x) for x in m.edges[e]]
    return TestReport(not dis, "uniformity", {
        "collisions": [as_pair(e) for e in coll],
        "disagreements": [as_pair(e) for e in dis],
    })


def uniformity_exact_tiny(b: WitnessBundle, m: Matching) -> float:
    """Exact ``P[some edge shows both signs]`` by enumerating all outcome tuples."""
    if b.N > TINY_N_CAP or b.K > TINY_K_CAP:
        raise StateError(f"exact enumeration limited to N <= {TINY_N_CAP}, K <= {TINY_K_CAP}")
    P = _bundle_distributions(b, m)
    n_out = P.shape[1]
    grids = np.indices((n_out,) * b.K).reshape(b.K, -1)
    prob = np.ones(grids.shape[1])
    for k in range(b.K):
        prob *= P[k, grids[k]]
    bad = np.zeros(grids.shape[1], dtype=bool)
    for k1, k2 in itertools.combinations(range(b.K), 2):
        bad |= (grids[k1] // 2 == grids[k2] // 2) & (grids[k1] != grids[k2])
    return float(prob[bad].sum())


def run_protocol(b: WitnessBundle, inst: TwoOutOfFourInstance, part: BlockPartition,
                 rng: np.random.Generator,
                 projections: tuple[np.ndarray, np.ndarray] | None = None) -> TestReport:
    """Pick one of the three tests uniformly; the Satisfiability Test uses witness 1."""
    if b.N != inst.num_vars:
        raise StateError("bundle dimension does not match the instance")
    branch = BRANCHES[int(rng.integers(3))]
    if branch == "satisfiability":
        return satisfiability_test(b.witnesses[0], inst, part, rng, projections)
    if branch == "symmetry":
        return symmetry_test(b, rng)
    return uniformity_test(b, rng)
