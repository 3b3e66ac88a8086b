import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qmasat.analysis import random_matching
from qmasat.merlin import WitnessBundle, adversary_concentrated, honest_bundle
from qmasat.quantum_state import Matching, StateError, StateVector, proper_state, random_state
from qmasat.reduction import reduce_full
from qmasat.sat_core import TwoOutOfFourInstance, eval_2in4, random_2in4, random_3sat
from qmasat.verifier import (
    clause_projections,
    conditional_rejection,
    partition_blocks,
    run_protocol,
    satisfiability_test,
    satisfiability_test_exact,
    satisfiability_test_exact_fraction,
    symmetry_test,
    symmetry_test_prob,
    uniformity_exact_tiny,
    uniformity_test,
)


def projector_oracle(s, inst, part):
    """Oracle: build each clause's satisfying-subspace projector as a dense matrix."""
    N = s.dim
    rej = 0.0
    for clause in inst.clauses:
        u = np.zeros(N)
        for v, n in clause:
            u[v] = (-1.0 if n else 1.0) / 2
        P = np.outer(u, u)
        rej += float(np.vdot(s.amps, P @ s.amps).real)
    return 1 - rej / part.s


def test_partition_blocks_disjoint():
    inst = random_2in4(40, 60, 8, 0)
    part = partition_blocks(inst)
    assert sorted(c for b in part.blocks for c in b) == list(range(inst.m))
    for b in part.blocks:
        vs = [v for ci in b for v, _ in inst.clauses[ci]]
        assert len(vs) == len(set(vs))
    assert part.s <= 4 * 7 + 1


@given(st.integers(0, 10_000))
@settings(max_examples=30)
def test_exact_matches_projector_oracle(seed):
    rng = np.random.default_rng(seed)
    inst = random_2in4(12, 10, 8, seed)
    part = partition_blocks(inst)
    s = random_state(12, rng)
    assert abs(satisfiability_test_exact(s, inst, part) - projector_oracle(s, inst, part)) < 1e-12


@given(st.integers(0, 10_000))
@settings(max_examples=30)
def test_fraction_path_matches_float(seed):
    rng = np.random.default_rng(seed)
    inst = random_2in4(12, 10, 8, seed)
    part = partition_blocks(inst)
    a = rng.integers(0, 2, 12)
    f = satisfiability_test_exact_fraction(a, inst, part)
    assert abs(float(f) - satisfiability_test_exact(proper_state(a), inst, part)) < 1e-12
    if eval_2in4(inst, a) == 1.0:
        assert f == 1


def test_perfect_completeness_on_reduction():
    inst = random_3sat(5, 8, 3)
    cert = reduce_full(inst)
    a = next(a for a in itertools.product((0, 1), repeat=5)
             if all(any(a[v] ^ n for v, n in c) for c in inst.clauses))
    b = cert.lift(a)
    part = partition_blocks(cert.target)
    assert satisfiability_test_exact_fraction(b, cert.target, part) == Fraction(1)


def test_conditional_rejection_patterns():
    vals = {}
    for bits in itertools.product((0, 1), repeat=4):
        vals[bits] = conditional_rejection([(-1) ** b for b in bits])
    assert sorted(vals.values()).count(0.0) == 6
    assert sum(abs(v - 0.25) < 1e-12 for v in vals.values()) == 8
    assert sum(abs(v - 1.0) < 1e-12 for v in vals.values()) == 2


def test_clause_projections_shapes():
    inst = random_2in4(8, 4, 8, 1)
    mass, rej = clause_projections(random_state(8, np.random.default_rng(0)), inst)
    assert mass.shape == rej.shape == (4,)
    assert np.all(rej <= mass + 1e-12)


def test_dimension_mismatch():
    inst = random_2in4(8, 4, 8, 1)
    with pytest.raises(StateError):
        satisfiability_test_exact(random_state(6, np.random.default_rng(0)), inst, partition_blocks(inst))


def test_satisfiability_sampler_matches_exact(rng):
    inst = random_2in4(16, 12, 8, 4)
    part = partition_blocks(inst)
    s = random_state(16, rng)
    p = satisfiability_test_exact(s, inst, part)
    proj = clause_projections(s, inst)
    n = 40_000
    hits = sum(satisfiability_test(s, inst, part, rng, proj).accept for _ in range(n))
    assert abs(hits / n - p) <= 4 * math.sqrt(p * (1 - p) / n)


def test_symmetry_test(rng):
    b = honest_bundle((0, 1, 0, 1), 4)
    assert symmetry_test_prob(b) == 1.0
    assert all(symmetry_test(b, rng).accept for _ in range(100))
    with pytest.raises(StateError):
        symmetry_test(honest_bundle((0, 1), 1), rng)


def test_uniformity_honest_never_rejects(rng):
    b = honest_bundle(rng.integers(0, 2, 32), 12)
    for _ in range(300):
        assert uniformity_test(b, rng).accept


def test_uniformity_reports_collisions(rng):
    b = adversary_concentrated([0, 1], 6, rng, 4)
    m = Matching(np.array([[0, 1], [2, 3]]))
    r = uniformity_test(b, rng, m)
    assert r.detail["collisions"] == [[0, 1]]


@pytest.mark.parametrize("N,K", [(2, 2), (4, 2), (4, 3), (6, 3), (8, 2), (4, 4)])
def test_uniformity_tiny_oracle(N, K, rng):
    ws = tuple(random_state(N, rng) for _ in range(K))
    b = WitnessBundle(ws)
    m = random_matching(N, rng)
    p = uniformity_exact_tiny(b, m)
    n = 20_000
    rej = sum(not uniformity_test(b, rng, m).accept for _ in range(n))
    assert abs(rej / n - p) <= 4 * math.sqrt(max(p * (1 - p), 1e-12) / n) + 1e-12


def test_uniformity_tiny_caps(rng):
    with pytest.raises(StateError):
        uniformity_exact_tiny(honest_bundle(np.zeros(18, int), 2), random_matching(18, rng))


def test_run_protocol_branches(rng):
    inst = random_2in4(16, 12, 8, 4)
    part = partition_blocks(inst)
    b = honest_bundle(rng.integers(0, 2, 16), 4)
    tests = [run_protocol(b, inst, part, rng).test for _ in range(900)]
    for name in ("satisfiability", "symmetry", "uniformity"):
        assert abs(tests.count(name) / 900 - 1 / 3) < 0.07
