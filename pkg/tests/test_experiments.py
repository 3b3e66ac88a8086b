import numpy as np
import pytest

from qmasat.experiments import (
    MATCHING_FAMILIES,
    build_bundle,
    load_matching_defaults,
    matching_family_state,
    run_matching_check,
    run_protocol_trials,
    run_sweep,
    substream,
    summarize,
    sweep_cell,
)
from qmasat.quantum_state import distance_to_proper
from qmasat.sat_core import random_2in4


def test_substream_deterministic_and_distinct():
    a = substream(7, 0, 1).random(4)
    assert np.array_equal(a, substream(7, 0, 1).random(4))
    assert not np.array_equal(a, substream(7, 0, 2).random(4))
    assert not np.array_equal(a, substream(8, 0, 1).random(4))


def test_build_bundle_strategies(rng):
    a = rng.integers(0, 2, 16)
    for s in ("honest", "concentrated", "phased", "nonidentical"):
        b = build_bundle(s, a, 4, rng)
        assert b.K == 4 and b.N == 16
    with pytest.raises(ValueError):
        build_bundle("nope", a, 4, rng)


def test_matching_defaults_file():
    d = load_matching_defaults()
    assert d["c"] > 0 and d["d"] > 0
    assert set(d["eps"]) == set(MATCHING_FAMILIES)


@pytest.mark.parametrize("family", MATCHING_FAMILIES)
def test_family_states_meet_eps_floor(family):
    eps = load_matching_defaults()["eps"][family]
    for seed in range(5):
        for N in (64, 256):
            s = matching_family_state(family, N, substream(seed, 4, N, 0))
            assert distance_to_proper(s) >= eps


def test_run_matching_check_small():
    r = run_matching_check("concentrated", 64, 200, seed=3)
    assert r.frequency >= 1 / 3 and r.distance >= r.eps


def test_protocol_trials_reproducible():
    inst = random_2in4(16, 12, 8, 0)
    b = build_bundle("phased", np.zeros(16, int), 4, substream(1, 1))
    r1 = [r.to_record() for r in run_protocol_trials(b, inst, 50, 9)]
    r2 = [r.to_record() for r in run_protocol_trials(b, inst, 50, 9)]
    assert r1 == r2
    s = summarize(run_protocol_trials(b, inst, 50, 9))
    assert sum(v["runs"] for v in s["branches"].values()) == 50


def test_sweep_grid_and_honest_rows():
    rows = run_sweep([16, 32], [1.0, 2.0], ["honest", "concentrated"], 50, 0)
    assert len(rows) == 2 * 2 * 2
    assert all(r["rejections"] == 0 for r in rows if r["strategy"] == "honest")


@pytest.mark.parametrize("strategy", ["honest", "concentrated", "phased"])
def test_sweep_beta_monotone_collisions(strategy):
    freqs = [sweep_cell(64, beta, strategy, 300, 5)["collision_freq"] for beta in (0.5, 1.0, 2.0, 4.0)]
    assert all(x <= y for x, y in zip(freqs, freqs[1:]))
