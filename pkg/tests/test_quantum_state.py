import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import chisquare

from qmasat.analysis import random_matching
from qmasat.quantum_state import (
    Matching,
    StateError,
    StateVector,
    distance_to_proper,
    impropriety,
    inner,
    matching_distribution,
    max_proper_overlap,
    measure_matching,
    nearest_proper,
    nonuniformity,
    proper_state,
    random_state,
    round_at_impropriety_phase,
    sample_matching_outcomes,
    swap_test,
    swap_test_prob,
    trace_distance_pure,
)

seeds = st.integers(0, 2**32 - 1)


def brute_distance_to_proper(s):
    """Oracle: enumerate every sign vector."""
    N = s.dim
    best = max(itertools.product((1, -1), repeat=N),
               key=lambda sg: abs(np.vdot(np.array(sg), s.amps)))
    p = np.array(best) / math.sqrt(N)
    return float(np.linalg.norm(s.amps - np.vdot(p, s.amps) * p))


def test_proper_state_examples():
    assert np.allclose(proper_state((0, 0), 2).amps, [1 / math.sqrt(2)] * 2)
    assert np.allclose(proper_state((0, 1), 2).amps, [1 / math.sqrt(2), -1 / math.sqrt(2)])
    with pytest.raises(StateError):
        proper_state((0, 1), 3)


@given(st.integers(1, 40), seeds)
def test_proper_inner_product(N, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.integers(0, 2, N), rng.integers(0, 2, N)
    ham = int((a != b).sum())
    assert abs(inner(proper_state(a), proper_state(b)) - (N - 2 * ham) / N) < 1e-12


def test_norm_rejection_and_renormalization():
    with pytest.raises(StateError):
        StateVector(np.array([1.0, 1.0]))
    s = StateVector(np.array([1.0 + 5e-7, 0.0]))
    assert abs(np.linalg.norm(s.amps) - 1) < 1e-15


@given(st.integers(1, 16), seeds)
def test_state_round_trip_bit_exact(N, seed):
    s = random_state(N, np.random.default_rng(seed))
    t = StateVector.loads(s.dumps())
    assert np.array_equal(s.amps, t.amps)


def test_trace_distance_examples():
    a = StateVector(np.array([1, 0]))
    b = StateVector(np.array([1, 1]) / math.sqrt(2))
    assert trace_distance_pure(a, a) == 0
    assert trace_distance_pure(a, StateVector(np.array([0, 1]))) == 1
    assert abs(trace_distance_pure(a, b) - 1 / math.sqrt(2)) < 1e-15
    with pytest.raises(StateError):
        trace_distance_pure(a, StateVector(np.array([1, 0, 0])))


def test_swap_test_examples(rng):
    a = StateVector(np.array([1, 0]))
    assert swap_test_prob(a, a) == 1.0
    assert swap_test_prob(a, StateVector(np.array([0, 1]))) == 0.5
    for eps in (0.1, 0.5, 0.9):
        b = StateVector(np.array([math.sqrt(1 - eps), math.sqrt(eps)]))
        assert abs((1 - swap_test_prob(a, b)) - eps / 2) < 1e-12
    b = StateVector(np.array([math.sqrt(0.7), math.sqrt(0.3)]))
    hits = sum(swap_test(a, b, rng) for _ in range(40_000))
    p = swap_test_prob(a, b)
    assert abs(hits / 40_000 - p) < 4 * math.sqrt(p * (1 - p) / 40_000)


def test_nonuniformity_examples(rng):
    assert nonuniformity(proper_state(rng.integers(0, 2, 9))) < 1e-15
    e = np.zeros(4)
    e[1] = 1
    assert abs(nonuniformity(StateVector(e)) - 0.75) < 1e-15
    for _ in range(200):
        N = int(rng.integers(1, 30))
        assert -1e-15 <= nonuniformity(random_state(N, rng)) <= 1 - 1 / N + 1e-12


def test_impropriety_examples(rng):
    assert impropriety(proper_state(rng.integers(0, 2, 12))) < 1e-9
    for N in (2, 5, 16):
        e = np.zeros(N)
        e[1] = 1
        assert abs(impropriety(StateVector(e)) - 2 * (N - 1) / N) < 1e-9
    for _ in range(50):
        v = impropriety(random_state(int(rng.integers(1, 20)), rng))
        assert -1e-12 <= v <= 2 + 1e-12


def test_impropriety_phase_invariant(rng):
    s = random_state(10, rng)
    t = StateVector(s.amps * np.exp(0.7j))
    assert abs(impropriety(s) - impropriety(t)) < 1e-8


@given(st.integers(1, 12), seeds)
def test_max_proper_overlap_matches_brute(N, seed):
    s = random_state(N, np.random.default_rng(seed))
    assert abs(distance_to_proper(s) - brute_distance_to_proper(s)) < 1e-9


def test_nearest_proper_of_proper(rng):
    a = rng.integers(0, 2, 10)
    p, d = nearest_proper(proper_state(a))
    assert d < 1e-7
    assert abs(abs(inner(p, proper_state(a))) - 1) < 1e-12


def test_nearest_proper_beats_random_proper(rng):
    for _ in range(20):
        s = random_state(16, rng)
        _, d = nearest_proper(s)
        others = [trace_distance_pure(s, proper_state(rng.integers(0, 2, 16))) for _ in range(1000)]
        assert d <= min(others) + 1e-12


def test_implem_rounding(rng):
    """States with imp <= eps^2 round within eps."""
    for _ in range(100):
        N = int(rng.integers(2, 20))
        base = proper_state(rng.integers(0, 2, N)).amps
        v = base + rng.uniform(0, 0.5) * (rng.normal(size=N) + 1j * rng.normal(size=N)) / math.sqrt(2 * N)
        s = StateVector.normalized(v)
        _, d = round_at_impropriety_phase(s)
        assert d <= math.sqrt(impropriety(s)) + 1e-7


def test_matching_validation():
    with pytest.raises(StateError):
        Matching(np.array([[0, 1], [1, 2]]))
    m = Matching(np.array([[3, 0], [1, 2]]))
    assert m.N == 4 and m.key() == ((0, 3), (1, 2))


def test_matching_distribution_examples(rng):
    a = np.array([0, 0, 0, 1])
    s = proper_state(a)
    m = Matching(np.array([[0, 1], [2, 3]]))
    P = matching_distribution(s, m)
    assert np.allclose(P, [[0.5, 0.0], [0.0, 0.5]])
    s = StateVector(np.array([1, 1j, 1, 1j]) / 2)
    P = matching_distribution(s, m)
    assert np.allclose(P[:, 0], P[:, 1])


@given(st.integers(1, 10), seeds)
def test_matching_pair_mass(half, seed):
    rng = np.random.default_rng(seed)
    s = random_state(2 * half, rng)
    m = random_matching(2 * half, rng)
    P = matching_distribution(s, m)
    assert np.allclose(P.sum(axis=1), s.probs()[m.edges].sum(axis=1), atol=1e-12)
    assert abs(P.sum() - 1) < 1e-12


def test_measure_matching_frequencies(rng):
    s = random_state(8, rng)
    m = random_matching(8, rng)
    P = matching_distribution(s, m).reshape(-1)
    e, sg = sample_matching_outcomes(s, m, rng, 100_000)
    flat = 2 * e + (sg == -1)
    counts = np.bincount(flat, minlength=8)
    assert chisquare(counts, P * 100_000).pvalue > 1e-4


def test_measure_matching_point_mass_and_determinism():
    s = StateVector(np.array([1, 1, 0, 0]) / math.sqrt(2))
    m = Matching(np.array([[0, 1], [2, 3]]))
    for seed in range(5):
        o = measure_matching(s, m, np.random.default_rng(seed))
        assert o.edge == (0, 1) and o.sign == 1
    s = random_state(6, np.random.default_rng(1))
    m = Matching(np.array([[0, 1], [2, 3], [4, 5]]))
    seq = lambda: [measure_matching(s, m, r) for r in [np.random.default_rng(9)] for _ in range(10)]
    assert seq() == seq()


def test_odd_dimension_rejected():
    s = random_state(5, np.random.default_rng(0))
    with pytest.raises(StateError):
        matching_distribution(s, Matching(np.array([[0, 1], [2, 3]])))
