"""Small-scale numerical checks of the protocol's lemmas.

Every check returns ``(ok, detail)``; ``detail`` is a JSON-ready dict of the
measured quantities and bounds.  A check raises :class:`PreconditionError`
only when it is asked to run outside its hypotheses.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

from .amplification import (
    TwoQubitDensity,
    bernoulli_verifier,
    check_2nlem,
    check_eflem,
    ef_two_qubit,
    ef_vanishes,
    k_to_two,
    nearest_separable,
    one_sided_amplify,
    ppt_separable,
    random_density,
    random_rank1_measurement,
    sym_to_plain,
    werner,
    werner_separable_distance,
    werner_threshold,
)
from .analysis import (
    PreconditionError,
    adversarial_perturbation,
    birthday_collision,
    birthday_intermediates,
    check_matching_theorem,
    check_sortlem,
    check_unbalwrt,
    collision_prob_identical,
    conditional_variation,
    heavy_light_decompose,
    min_mean_distance,
    overlap_bound,
    perturbed_family,
    sector_split,
    uniform_collision_product,
)
from .merlin import WitnessBundle
from .quantum_state import (
    StateVector,
    distance_to_proper,
    fidelity,
    impropriety,
    nearest_proper,
    proper_state,
    random_state,
    round_at_impropriety_phase,
    swap_test_prob,
    trace_distance_pure,
)
from .reduction import verify_gadgets
from .verifier import conditional_rejection

TOL = 1e-12


def _rand_vec(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


# Reduction and clause measurement -------------------------------------------------

def gadget_check() -> tuple[bool, dict]:
    verify_gadgets()
    return True, {"polarity_patterns": 8}


def clause_pattern_check() -> tuple[bool, dict]:
    """All 16 sign patterns under all 8 polarity patterns of a 2-in-4 clause."""
    expected = {0: 1.0, 1: 0.25, 2: 0.0, 3: 0.25, 4: 1.0}
    worst = 0.0
    counts = {"zero": 0, "quarter": 0, "one": 0}
    for negs in itertools.product((False, True), repeat=4):
        for bits in itertools.product((0, 1), repeat=4):
            signs = [(-1) ** b for b in bits]
            t = sum(b ^ n for b, n in zip(bits, negs))
            r = conditional_rejection(signs, negs)
            worst = max(worst, abs(r - expected[t]))
            if negs == (False,) * 4:
                counts[{0.0: "zero", 0.25: "quarter", 1.0: "one"}[expected[t]]] += 1
    ok = worst <= 1e-12 and counts == {"zero": 6, "quarter": 8, "one": 2}
    return ok, {"max_error": worst, "counts": counts}


# Pure-state propositions --------------------------------------------------------------

def swaptest_check(rng: np.random.Generator, trials: int) -> tuple[bool, dict]:
    """Swap-test rejection equals (1 - |<a|b>|^2)/2 and trace distance obeys the triangle inequality."""
    worst_swap = worst_tri = 0.0
    for _ in range(trials):
        d = int(rng.integers(2, 9))
        a, b, c = (random_state(d, rng) for _ in range(3))
        eps = 1.0 - fidelity(a, b)
        worst_swap = max(worst_swap, abs((1.0 - swap_test_prob(a, b)) - eps / 2))
        tri = trace_distance_pure(a, c) - trace_distance_pure(a, b) - trace_distance_pure(b, c)
        worst_tri = max(worst_tri, tri)
    return worst_swap <= 1e-12 and worst_tri <= 1e-12, {
        "max_swap_error": worst_swap, "max_triangle_excess": worst_tri, "trials": trials}


def closeprop_check(rng: np.random.Generator, trials: int) -> tuple[bool, dict]:
    """Accept-probability gap <= trace distance, and product fidelity >= 1 - sum eps_i."""
    worst_close = worst_prod = -np.inf
    for _ in range(trials):
        d = int(rng.integers(2, 9))
        a, b = random_state(d, rng), random_state(d, rng)
        r = int(rng.integers(1, d + 1))
        Z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        Q, _ = np.linalg.qr(Z)
        P = Q[:, :r] @ Q[:, :r].conj().T
        pa = float(np.vdot(a.amps, P @ a.amps).real)
        pb = float(np.vdot(b.amps, P @ b.amps).real)
        worst_close = max(worst_close, abs(pa - pb) - trace_distance_pure(a, b))
        k = int(rng.integers(1, 5))
        xs, ys = [], []
        for _ in range(k):
            dd = int(rng.integers(2, 9))
            x = random_state(dd, rng)
            y = StateVector.normalized(x.amps + rng.uniform(0, 0.5) * _rand_vec(rng, dd))
            xs.append(x)
            ys.append(y)
        fids = np.array([fidelity(x, y) for x, y in zip(xs, ys)])
        worst_prod = max(worst_prod, (1 - (1 - fids).sum()) - float(np.prod(fids)))
    ok = worst_close <= 1e-12 and worst_prod <= 1e-12
    return ok, {"max_closeprop_excess": worst_close, "max_closetopure_excess": worst_prod,
                "trials": trials}


def implem_check(rng: np.random.Generator, trials: int) -> tuple[bool, dict]:
    """States with imp <= eps^2 round to a proper state within eps (eps = sqrt(imp))."""
    worst = -np.inf
    oracle_gap = -np.inf
    for t in range(trials):
        N = int(rng.integers(2, 33))
        base = proper_state(rng.integers(0, 2, size=N)).amps * np.exp(1j * rng.uniform(0, 2 * np.pi))
        scale = rng.uniform(0.0, 0.6) if t % 4 else rng.uniform(0.6, 3.0)
        s = StateVector.normalized(base + scale * _rand_vec(rng, N) / math.sqrt(2))
        eps = math.sqrt(impropriety(s))
        _, d_round = round_at_impropriety_phase(s)
        _, d_near = nearest_proper(s)
        worst = max(worst, d_round - eps)
        oracle_gap = max(oracle_gap, abs(d_near - distance_to_proper(s)))
    ok = worst <= 1e-7 and oracle_gap <= 1e-9
    return ok, {"max_excess_over_eps": worst, "nearest_vs_exact": oracle_gap, "trials": trials}


# Nonuniform-case propositions ---------------------------------------------------------

def heavy_light_check(rng: np.random.Generator, trials: int) -> tuple[bool, dict]:
    bad = 0
    for _ in range(trials):
        N = int(rng.integers(2, 65))
        p = rng.dirichlet(np.full(N, rng.uniform(0.2, 5.0)))
        nu = 0.5 * float(np.abs(p - 1 / N).sum())
        if nu <= 1e-9:
            continue
        hl = heavy_light_decompose(p, rng.uniform(0.05, 1.0) * nu)
        bad += not (hl.light_ok and hl.heavy_ok)
    return bad == 0, {"violations": bad, "trials": trials}


def random_sector_family(rng: np.random.Generator, n: int | None = None
                         ) -> tuple[np.ndarray, float, float]:
    """A random vector family with its kappa (90% of the measured spread) and delta."""
    n = n if n is not None else int(rng.integers(40, 201))
    clusters = int(rng.integers(2, 5))
    centers = rng.uniform(0, 2 * np.pi, size=clusters)
    ang = centers[rng.integers(clusters, size=n)] + rng.normal(0, rng.uniform(0.01, 0.5), size=n)
    V0 = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    spread = min_mean_distance(V0, 2000)
    kappa = min(2.0, 0.9 * spread)
    delta = rng.uniform(0, 0.5) * kappa / 2 * 0.2
    V = V0 * (1 + rng.uniform(-delta, delta, size=(n, 1)))
    return V, kappa, delta


def geolem_check(rng: np.random.Generator, trials: int) -> tuple[bool, dict]:
    bad = admissible = 0
    for _ in range(trials):
        V, kappa, delta = random_sector_family(rng)
        if kappa <= 0.05:
            continue
        try:
            sp = sector_split(V, kappa, delta)
        except PreconditionError:
            continue
        admissible += 1
        bad += not sp.bounds_hold(len(V))
    ok = bad == 0 and admissible > 0
    return ok, {"violations": bad, "admissible": admissible, "trials": trials}


# Conditioning lemmas ----------------------------------------------------------------

def condvar_check(rng: np.random.Generator, trials: int) -> tuple[bool, dict]:
    bad = used = 0
    slack = np.inf
    for _ in range(trials):
        n = int(rng.integers(2, 9))
        p = rng.dirichlet(np.ones(n))
        q = (1 - (w := rng.uniform(0, 0.5))) * p + w * rng.dirichlet(np.ones(n))
        E = rng.random(n) < 0.6
        if not E.any():
            E[rng.integers(n)] = True
        try:
            lhs, bound = conditional_variation(p, q, E)
        except PreconditionError:
            continue
        used += 1
        bad += lhs > bound + TOL
        slack = min(slack, bound - lhs)
    return bad == 0 and used > 0, {"violations": bad, "checked": used, "min_slack": slack}


def random_unbalanced(rng: np.random.Generator, n: int, c: float) -> np.ndarray:
    """An (n, 2) joint distribution that is c-unbalanced at every x."""
    # 2 t (1 - t) >= c  <=>  t in [t0, 1 - t0]
    t0 = (1 - math.sqrt(1 - 2 * c)) / 2
    T = rng.dirichlet(np.ones(n))
    t = rng.uniform(t0, 1 - t0, size=n)
    return np.stack([T * t, T * (1 - t)], axis=1)


def unbalwrt_check(rng: np.random.Generator, trials: int) -> tuple[bool, dict]:
    bad = 0
    slack = np.inf
    for k in range(trials):
        n = int(rng.integers(1, 9))
        c = rng.uniform(0.05, 0.499)
        cp = rng.uniform(0.01, 0.99) * c / 2
        D = random_unbalanced(rng, n, c)
        mu = rng.uniform(0, 0.3)
        if k % 2:
            Dp = adversarial_perturbation(D, mu, cp)
        else:
            noise = rng.dirichlet(np.ones(2 * n)).reshape(n, 2)
            Dp = (1 - mu) * D + mu * noise
        mass, bound = check_unbalwrt(D, Dp, c, cp)
        bad += mass < bound - TOL
        slack = min(slack, mass - bound)
    return bad == 0, {"violations": bad, "trials": trials, "min_slack": slack}


def epsclose_check(rng: np.random.Generator, trials: int) -> tuple[bool, dict]:
    bad = 0
    for _ in range(trials):
        n = int(rng.integers(1, 33))
        p = rng.dirichlet(np.full(n, rng.uniform(0.1, 3)))
        q = rng.dirichlet(np.full(n, rng.uniform(0.1, 3)))
        lhs, rhs = overlap_bound(p, q)
        bad += lhs < rhs - TOL
    return bad == 0, {"violations": bad, "trials": trials}


def sortlem_check(rng: np.random.Generator, trials: int) -> tuple[bool, dict]:
    bad = 0
    for t in range(trials):
        K = int(rng.integers(0, 65))
        if t % 10 == 0:
            p = [Fraction(int(x)) for x in rng.integers(0, 20, size=K)]
        else:
            p = list(rng.exponential(size=K) ** rng.uniform(0.2, 4))
        ok, _, _ = check_sortlem(p)
        bad += not ok
    return bad == 0, {"violations": bad, "trials": trials}


# Birthday bounds ----------------------------------------------------------------------

BIRTHDAY_N = 100
BIRTHDAY_K = 320
BIRTHDAY_EPS = 0.1


def birthday_family(rng: np.random.Generator, n: int = BIRTHDAY_N, K: int = BIRTHDAY_K,
                    eps: float = BIRTHDAY_EPS) -> np.ndarray:
    """K distributions on [n], pairwise variation <= eps, around a near-uniform base."""
    base = rng.dirichlet(np.full(n, 50.0))
    return perturbed_family(n, K, eps, rng, base)


def birthday2_check(rng: np.random.Generator, trials: int) -> tuple[bool, dict]:
    D = birthday_family(rng)
    tv = 0.5 * np.abs(D[:, None, :] - D[None, :, :]).sum(axis=2).max()
    if tv > BIRTHDAY_EPS + 1e-12 or BIRTHDAY_K < 32 * math.sqrt(BIRTHDAY_N):
        raise PreconditionError("engineered family violates the theorem's hypotheses")
    f_ind = birthday_collision(D, rng, trials, "independent")
    f_4w = birthday_collision(D, rng, trials, "fourwise")
    return min(f_ind, f_4w) >= 0.5, {"max_pairwise_tv": float(tv), "independent": f_ind,
                                     "fourwise": f_4w, "trials": trials}


def birthday2_chain_check(rng: np.random.Generator) -> tuple[bool, dict]:
    """Corrected second-moment chain; the stated 900 floor is reported, not gated."""
    bi = birthday_intermediates(birthday_family(rng), BIRTHDAY_EPS)
    detail = {"EY": bi.EY, "lemma_bound": bi.lemma_bound, "stated_floor": bi.stated_floor,
              "stated_floor_holds": bi.stated_floor_holds, "tau3": bi.tau3,
              "tau3_bound": bi.tau3_bound, "chebyshev_bound": bi.chebyshev_bound,
              "required_EY": bi.required_EY}
    return bi.chain_holds, detail


def bloom_check(rng: np.random.Generator, trials: int) -> tuple[bool, dict]:
    """Uniform birthdays minimize the i.i.d. collision probability."""
    bad = 0
    err = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 60))
        K = int(rng.integers(2, 15))
        u = collision_prob_identical(np.full(n, 1 / n), K)
        err = max(err, abs(u - uniform_collision_product(n, K)))
        p = rng.dirichlet(np.full(n, rng.uniform(0.1, 10)))
        bad += collision_prob_identical(p, K) < u - 1e-12
    return bad == 0 and err <= 1e-12, {"violations": bad, "uniform_formula_error": err,
                                       "trials": trials}


# Matching theorem ---------------------------------------------------------------------

def matching_check(seed: int, trials: int, N: int = 64,
                   defaults: dict | None = None) -> tuple[bool, dict]:
    from .experiments import MATCHING_FAMILIES, run_matching_check

    runs = {f: run_matching_check(f, N, trials, seed, defaults) for f in MATCHING_FAMILIES}
    ok = all(r.frequency >= 1 / 3 for r in runs.values())
    return ok, {f: {"frequency": r.frequency, "wilson_low": r.wilson_low, "eps": r.eps,
                    "distance": r.distance} for f, r in runs.items()}


def matching_on_proper(rng: np.random.Generator) -> tuple[bool, dict]:
    """Deliberately violates the farness precondition; expected to be skipped."""
    s = proper_state(rng.integers(0, 2, size=64))
    r = check_matching_theorem(s, 0.1, 1.0, 1.0, 10, rng)
    return False, {"frequency": r.frequency}


# Entanglement toolbox ------------------------------------------------------------------

def random_mixed_density(rng: np.random.Generator) -> TwoQubitDensity:
    """Random densities of every rank, plus Werner-like mixtures near the PPT boundary."""
    kind = int(rng.integers(3))
    if kind < 2:
        return random_density(rng, int(rng.integers(1, 5)))
    psi = _rand_vec(rng, 4)
    p = rng.uniform(0.2, 0.5)
    return TwoQubitDensity(p * np.outer(psi, psi.conj()) + (1 - p) * np.eye(4) / 4)


def ef_ppt_check(rng: np.random.Generator, trials: int) -> tuple[bool, dict]:
    dis = sep = 0
    for _ in range(trials):
        rho = random_mixed_density(rng)
        a, b = ef_vanishes(rho), ppt_separable(rho)
        dis += a != b
        sep += b
    return dis == 0, {"disagreements": dis, "separable": sep, "trials": trials}


def ef_convexity_check(rng: np.random.Generator, trials: int) -> tuple[bool, dict]:
    bad = 0
    for _ in range(trials):
        r, s = random_mixed_density(rng), random_mixed_density(rng)
        lam = rng.random()
        mix = TwoQubitDensity(lam * r.rho + (1 - lam) * s.rho)
        bad += ef_two_qubit(mix) > lam * ef_two_qubit(r) + (1 - lam) * ef_two_qubit(s) + 1e-10
    return bad == 0, {"violations": bad, "trials": trials}


def werner_check() -> tuple[bool, dict]:
    thr = werner_threshold()
    errs = []
    for p in (0.2, 0.4, 0.6, 0.9):
        errs.append(abs(nearest_separable(werner(p)).distance - werner_separable_distance(p)))
    ok = abs(thr - 1 / 3) <= 1e-6 and max(errs) <= 1e-6
    return ok, {"threshold": thr, "max_sdp_vs_closed_form": max(errs)}


def low_ef_density(rng: np.random.Generator) -> TwoQubitDensity:
    """A state with small but typically nonzero E_F."""
    if rng.random() < 0.5:
        return werner(rng.uniform(0.3, 0.45))
    psi = _rand_vec(rng, 4)
    sep = np.kron(*(np.outer(v, v.conj()) for v in (_rand_vec(rng, 2), _rand_vec(rng, 2))))
    t = rng.uniform(0.0, 0.4)
    return TwoQubitDensity((1 - t) * (0.5 * sep + 0.5 * np.eye(4) / 4) + t * np.outer(psi, psi.conj()))


def eflem_check(rng: np.random.Generator, trials: int) -> tuple[bool, dict]:
    bad = 0
    min_slack = np.inf
    max_ef = 0.0
    for _ in range(trials):
        rho = low_ef_density(rng)
        ef = ef_two_qubit(rho)
        r = check_eflem(rho, max(ef, 1e-12))
        bad += not r.holds
        min_slack = min(min_slack, r.bound - r.distance)
        max_ef = max(max_ef, ef)
    return bad == 0, {"violations": bad, "min_slack": min_slack, "max_ef": max_ef,
                      "trials": trials}


def twon_check(rng: np.random.Generator, trials: int) -> tuple[bool, dict]:
    bad = 0
    max_after = 0.0
    for t in range(trials):
        q = 1 if t % 2 == 0 else int(rng.integers(1, 4))
        a, b = _rand_vec(rng, 2 ** q), _rand_vec(rng, 2 ** q)
        meas = random_rank1_measurement(rng, 4)
        r = check_2nlem(a, b, meas, int(rng.integers(4)), n=1)
        bad += not r.holds
        max_after = max(max_after, r.ef_after)
    return bad == 0, {"violations": bad, "max_ef_after": max_after, "bound": 2.0,
                      "trials": trials}


# Amplification and protocol skeletons ------------------------------------------------

def onesided_check(rng: np.random.Generator, trials: int = 100_000) -> tuple[bool, dict]:
    """Bernoulli(0.9) honest vs Bernoulli(0.5) cheating, p = 8, plus a coupled cheater."""
    a, b, p = 0.5, 0.9, 8
    amp = one_sided_amplify(bernoulli_verifier(b), a, b, p)
    honest = rng.binomial(amp.m, b, size=trials) >= amp.threshold
    cheat = rng.binomial(amp.m, a, size=trials) >= amp.threshold
    # classically coupled invocations: all m outcomes equal one Bernoulli(a) coin
    coupled = amp.run_outcomes(np.repeat(rng.random((trials, 1)) < a, amp.m, axis=1))
    comp, sound, sound_c = honest.mean(), cheat.mean(), coupled.mean()
    ok = comp >= 1 - 2.0 ** -p and sound <= 1 - (b - a) and sound_c <= 1 - (b - a)
    return bool(ok), {"m": amp.m, "d": amp.d, "completeness": float(comp),
                      "soundness_independent": float(sound), "soundness_coupled": float(sound_c),
                      "exact_completeness": amp.accept_prob_independent([b] * amp.m)}


def _perturbed(rng: np.random.Generator, x: StateVector, size: float) -> StateVector:
    return StateVector.normalized(x.amps + size * _rand_vec(rng, x.dim))


def ktotwo_case(rng: np.random.Generator, k: int, trials: int, dim: int = 4) -> dict:
    A = tuple(random_state(dim, rng) for _ in range(k))
    B = tuple(_perturbed(rng, x, rng.uniform(0.5, 2.0)) for x in A)
    eps_sq = 0.9 * float(sum(1 - fidelity(x, y) for x, y in zip(A, B)))
    inner = bernoulli_verifier(1.0, k, dim)
    honest = [k_to_two(WitnessBundle(A), WitnessBundle(A), inner, rng) for _ in range(trials)]
    cheat = [k_to_two(WitnessBundle(A), WitnessBundle(B), inner, rng) for _ in range(trials)]
    hs = [r for r in honest if r.test == "swap"]
    cs = [r for r in cheat if r.test == "swap"]
    return {"k": k, "honest_swap_accept": sum(r.accept for r in hs) / len(hs),
            "cheat_swap_reject": sum(not r.accept for r in cs) / len(cs),
            "bound": eps_sq / (2 * k), "eps_sq": eps_sq}


def symlem_case(rng: np.random.Generator, k: int, trials: int, dim: int = 4) -> dict:
    phi = random_state(dim, rng)
    W = (phi,) + tuple(_perturbed(rng, phi, rng.uniform(0.5, 2.0)) for _ in range(k - 1))
    eps_sq = 1.0 - float(np.prod([fidelity(phi, w) for w in W[1:]]))
    inner = bernoulli_verifier(1.0, k, dim)
    honest = [sym_to_plain(WitnessBundle((phi,) * k), inner, rng) for _ in range(trials)]
    cheat = [sym_to_plain(WitnessBundle(W), inner, rng) for _ in range(trials)]
    hs = [r for r in honest if r.test == "swap"]
    cs = [r for r in cheat if r.test == "swap"]
    return {"k": k, "honest_swap_accept": sum(r.accept for r in hs) / len(hs),
            "cheat_swap_reject": sum(not r.accept for r in cs) / len(cs),
            "bound": eps_sq / (2 * k), "eps_sq": eps_sq}


def _skeleton_ok(cases: list[dict]) -> bool:
    return all(c["honest_swap_accept"] == 1.0 and c["cheat_swap_reject"] > c["bound"] for c in cases)


def ktotwo_check(rng: np.random.Generator, trials: int) -> tuple[bool, dict]:
    cases = [ktotwo_case(rng, k, trials) for k in (2, 3, 4)]
    return _skeleton_ok(cases), {"cases": cases}


def symlem_check(rng: np.random.Generator, trials: int) -> tuple[bool, dict]:
    cases = [symlem_case(rng, k, trials) for k in (2, 3, 4)]
    return _skeleton_ok(cases), {"cases": cases}
