"""Numerical checks for the analysis: unbalanced edges in random matchings,
heavy/light and sector lemmas, conditioning lemmas, and birthday bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.stats import binomtest

from .quantum_state import Matching, StateError, StateVector, distance_to_proper


class PreconditionError(ValueError):
    """A lemma's hypotheses do not hold for the supplied input."""


def wilson_interval(hits: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    ci = binomtest(hits, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def as_distribution(p: Sequence[float], tol: float = 1e-12) -> np.ndarray:
    a = np.asarray(p, dtype=float).reshape(-1)
    if np.any(a < 0):
        raise PreconditionError("probabilities must be nonnegative")
    if abs(a.sum() - 1.0) > tol * max(1, a.size):
        raise PreconditionError(f"probabilities sum to {a.sum()!r}, not 1")
    return a


# Matchings and unbalanced edges -------------------------------------------------

def random_matching(N: int, rng: np.random.Generator) -> Matching:
    """Uniform perfect matching: pair up consecutive entries of a random permutation."""
    if N < 2 or N % 2:
        raise StateError(f"random matchings need even N >= 2, got {N}")
    return Matching(rng.permutation(N).reshape(-1, 2))


@dataclass(frozen=True)
class EdgeStats:
    edge: tuple[int, int]
    pair_mass: float
    disagreement_prob: float

    @property
    def unbalanced_at(self) -> float:
        # the edge is t-unbalanced exactly when p_ij >= t
        return self.disagreement_prob


def _edge_quantities(ai: np.ndarray, aj: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pp = np.abs(ai + aj) ** 2 / 2
    pm = np.abs(ai - aj) ** 2 / 2
    mass = np.abs(ai) ** 2 + np.abs(aj) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(mass > 0, 2 * pp * pm / mass ** 2, 0.0)
    return mass, p


def disagreement_prob(s: StateVector, edge: tuple[int, int]) -> float:
    i, j = edge
    _, p = _edge_quantities(s.amps[[i]], s.amps[[j]])
    return float(p[0])


def edge_stats(s: StateVector, m: Matching) -> list[EdgeStats]:
    ai, aj = s.amps[m.edges[:, 0]], s.amps[m.edges[:, 1]]
    mass, p = _edge_quantities(ai, aj)
    return [EdgeStats((int(i), int(j)), float(w), float(q))
            for (i, j), w, q in zip(m.edges, mass, p)]


def unbalanced_mask(s: StateVector, m: Matching, threshold: float) -> tuple[np.ndarray, np.ndarray]:
    """Boolean mask of edges with ``|a_i^2 - a_j^2|^2 >= 2 t (|a_i|^2 + |a_j|^2)^2`` and pair masses.

    Zero-mass edges are excluded.
    """
    ai, aj = s.amps[m.edges[:, 0]], s.amps[m.edges[:, 1]]
    mass = np.abs(ai) ** 2 + np.abs(aj) ** 2
    lhs = np.abs(ai * ai - aj * aj) ** 2
    return (lhs >= 2 * threshold * mass ** 2) & (mass > 0), mass


def unbalanced_set(s: StateVector, m: Matching, threshold: float
                   ) -> tuple[list[tuple[int, int]], float]:
    """Unbalanced edges and their largeness (total pair mass)."""
    mask, mass = unbalanced_mask(s, m, threshold)
    edges = [(int(i), int(j)) for i, j in m.edges[mask]]
    return edges, float(mass[mask].sum())


@dataclass(frozen=True)
class MatchingCheck:
    frequency: float
    hits: int
    trials: int
    wilson_low: float
    wilson_high: float
    eps: float
    c: float
    d: float
    distance: float


def check_matching_theorem(s: StateVector, eps: float, c: float, d: float, trials: int,
                           rng: np.random.Generator) -> MatchingCheck:
    """Frequency over random matchings that the ``c eps^8``-unbalanced set is ``d eps^4``-large."""
    dist = distance_to_proper(s)
    if dist < eps:
        raise PreconditionError(f"state is only {dist:.6g}-far from proper, need {eps}")
    thr, need = c * eps ** 8, d * eps ** 4
    hits = 0
    for _ in range(trials):
        _, large = unbalanced_set(s, random_matching(s.dim, rng), thr)
        hits += large >= need
    lo, hi = wilson_interval(hits, trials)
    return MatchingCheck(hits / trials, hits, trials, lo, hi, eps, c, d, dist)


# Heavy / light elements ----------------------------------------------------------

@dataclass(frozen=True)
class HeavyLight:
    H: np.ndarray
    H_star: np.ndarray
    L: np.ndarray
    L_star: np.ndarray
    kappa: float
    light_ok: bool   # |L*| >= kappa N / 2
    heavy_ok: bool   # W(H*) >= kappa / 2


def heavy_light_decompose(p: Sequence[float], kappa: float) -> HeavyLight:
    p = as_distribution(p, tol=1e-9)
    N = p.size
    nu = 0.5 * float(np.abs(p - 1.0 / N).sum())
    if kappa <= 0 or nu < kappa:
        raise PreconditionError(f"nonuniformity {nu:.6g} is below kappa={kappa}")
    H = np.flatnonzero(p >= 1.0 / N)
    Hs = np.flatnonzero(p >= (1 + kappa / 2) / N)
    L = np.flatnonzero(p < 1.0 / N)
    Ls = np.flatnonzero(p <= (1 - kappa / 4) / N)
    return HeavyLight(H, Hs, L, Ls, kappa,
                      light_ok=Ls.size >= kappa * N / 2,
                      heavy_ok=float(p[Hs].sum()) >= kappa / 2)


# Sector lemma --------------------------------------------------------------------

@dataclass(frozen=True)
class SectorSplit:
    X: np.ndarray
    Y: np.ndarray
    sectors: int
    min_distance: float
    kappa: float

    def bounds_hold(self, n: int) -> bool:
        need = self.kappa * n / 40
        return self.X.size >= need and self.Y.size >= need and self.min_distance >= self.kappa / 20


def min_mean_distance(V: np.ndarray, grid: int = 10_000, extra_angles: Sequence[float] = ()) -> float:
    """``min_w mean_v ||v - w||`` over a unit-circle grid plus any extra directions."""
    ang = np.concatenate([np.linspace(0, 2 * np.pi, grid, endpoint=False), np.asarray(extra_angles)])
    best = np.inf
    for k in range(0, ang.size, 1000):
        a = ang[k:k + 1000, None]
        dist = np.hypot(V[None, :, 0] - np.cos(a), V[None, :, 1] - np.sin(a)).mean(axis=1)
        best = min(best, float(dist.min()))
    return best


def sector_count(kappa: float) -> int:
    return math.ceil(30.0 / kappa)


def sector_split(V: Sequence[Sequence[float]], kappa: float, delta: float,
                 grid: int = 10_000) -> SectorSplit:
    V = np.asarray(V, dtype=float).reshape(-1, 2)
    n = V.shape[0]
    if n == 0 or kappa <= 0:
        raise PreconditionError("need a nonempty V and kappa > 0")
    norms = np.linalg.norm(V, axis=1)
    if np.any(norms < 1 - delta) or np.any(norms > 1 + delta):
        raise PreconditionError("vector norms fall outside [1 - delta, 1 + delta]")
    if delta > kappa / 2:
        raise PreconditionError("need delta <= kappa / 2")
    K = sector_count(kappa)
    width = 2 * np.pi / K
    bisectors = (np.arange(K) + 0.5) * width
    if min_mean_distance(V, grid, bisectors) < kappa:
        raise PreconditionError("V is not kappa-far on average from every unit vector")
    ang = np.mod(np.arctan2(V[:, 1], V[:, 0]), 2 * np.pi)
    sec = np.minimum((ang // width).astype(np.int64), K - 1)
    counts = np.bincount(sec, minlength=K)
    S = int(np.argmax(counts))
    near = {(S - 1) % K, S, (S + 1) % K}
    X = np.flatnonzero(sec == S)
    Y = np.flatnonzero(~np.isin(sec, list(near)))
    if X.size and Y.size:
        dmin = float(np.linalg.norm(V[X][:, None, :] - V[Y][None, :, :], axis=2).min())
    else:
        dmin = 0.0
    return SectorSplit(X, Y, K, dmin, kappa)


# Conditioning lemmas --------------------------------------------------------------

def conditional_variation(D1: Sequence[float], D2: Sequence[float], E: Sequence[bool]
                          ) -> tuple[float, float]:
    """``(||D1' - D2'||, kappa / (a - kappa))`` for the distributions conditioned on ``E``."""
    p, q = as_distribution(D1, 1e-9), as_distribution(D2, 1e-9)
    E = np.asarray(E, dtype=bool)
    kappa = tv_distance(p, q)
    a = float(p[E].sum())
    if a <= kappa:
        raise PreconditionError(f"P[E] = {a:.6g} does not exceed ||D1 - D2|| = {kappa:.6g}")
    b = float(q[E].sum())
    return tv_distance(p[E] / a, q[E] / b), kappa / (a - kappa)


def _unbalanced_pairs(p: np.ndarray, q: np.ndarray, c: float) -> np.ndarray:
    return 2 * p * q >= c * (p + q) ** 2


def check_unbalwrt(D: np.ndarray, Dp: np.ndarray, c: float, cp: float) -> tuple[float, float]:
    """Mass of the ``c'``-unbalanced set under ``D'`` and the bound ``1 - 8 mu / (c - 2 c')``.

    Distributions are ``(N, 2)`` arrays with columns ``(p_x, q_x)``.
    """
    if not (0 < c < 0.5 and 0 < cp < c / 2):
        raise PreconditionError("need c in (0, 1/2) and c' in (0, c/2)")
    D, Dp = np.asarray(D, dtype=float), np.asarray(Dp, dtype=float)
    as_distribution(D.reshape(-1), 1e-9)
    as_distribution(Dp.reshape(-1), 1e-9)
    if not np.all(_unbalanced_pairs(D[:, 0], D[:, 1], c) | (D.sum(axis=1) == 0)):
        raise PreconditionError("D is not c-unbalanced at every x")
    mu = tv_distance(D, Dp)
    S = _unbalanced_pairs(Dp[:, 0], Dp[:, 1], cp)
    return float(Dp[S].sum()), 1.0 - 8 * mu / (c - 2 * cp)


def adversarial_perturbation(D: np.ndarray, mu: float, cp: float) -> np.ndarray:
    """Spend a variation budget ``mu`` to push as much mass as possible out of the unbalanced set.

    For each ``x`` the cheapest move shifts mass from the smaller side to the
    larger one until ``2 p q < c' (p + q)^2``; points are bought in order of
    cost per unit of mass.
    """
    D = np.array(D, dtype=float)
    T = D.sum(axis=1)
    small = D.min(axis=1)
    target = T * (1 - math.sqrt(1 - 2 * cp)) / 2
    cost = np.maximum(small - target, 0.0) * (1 + 1e-9) + 1e-15
    with np.errstate(divide="ignore", invalid="ignore"):
        price = np.where(T > 0, cost / T, np.inf)
    budget = mu
    for x in np.argsort(price, kind="stable"):
        if T[x] == 0 or cost[x] > budget:
            continue
        lo, hi = (0, 1) if D[x, 0] <= D[x, 1] else (1, 0)
        t = min(cost[x], D[x, lo])
        D[x, lo] -= t
        D[x, hi] += t
        budget -= t
    return D


def overlap_bound(D1: Sequence[float], D2: Sequence[float]) -> tuple[float, float]:
    p, q = as_distribution(D1, 1e-9), as_distribution(D2, 1e-9)
    eps = tv_distance(p, q)
    return float(p @ q), (1 - eps) ** 2 / p.size


# Birthday bounds ------------------------------------------------------------------

def elementary_symmetric(p: Sequence, k: int) -> list:
    """``[e_0, ..., e_k]`` of ``p`` by the standard DP (exact for Fractions/ints)."""
    e = [1] + [0] * k
    for x in p:
        for j in range(min(k, len(e) - 1), 0, -1):
            e[j] = e[j] + x * e[j - 1]
    return e


def check_sortlem(p: Sequence, rel_tol: float = 1e-12) -> tuple[bool, float, float]:
    """Return ``(r^2 <= 2 s^3, r, s)`` with ``r = e_3(p)``, ``s = e_2(p)``.

    Float input is summed with nonnegative terms only, so no cancellation
    occurs; Fraction input is checked exactly.
    """
    vals = list(p)
    if any(x < 0 for x in vals):
        raise PreconditionError("sortlem needs nonnegative reals")
    e = elementary_symmetric(vals, 3)
    s, r = e[2], e[3]
    if all(isinstance(x, (int, Fraction)) for x in vals):
        ok = r * r <= 2 * s ** 3
    else:
        ok = r * r <= 2 * s ** 3 * (1 + rel_tol)
    return bool(ok), r, s


def uniform_collision_product(n: int, K: int) -> float:
    """Classic birthday formula ``1 - prod_{k<K} (1 - k/n)``."""
    return 1.0 - math.prod(1.0 - k / n for k in range(K))


def collision_prob_identical(p: Sequence[float], K: int) -> float:
    """Exact collision probability for K i.i.d. draws from ``p``: ``1 - K! e_K(p)``.

    The DP tracks ``k! e_k`` directly so large ``K`` does not overflow.
    """
    p = as_distribution(p, 1e-9)
    q = np.zeros(K + 1)
    q[0] = 1.0
    for x in p:
        q[1:] = q[1:] + np.arange(1, K + 1) * x * q[:-1]
    return float(min(1.0, max(0.0, 1.0 - q[K])))


def collision_prob_exact(dists: Sequence[Sequence[float]], budget: int = 2_000_000) -> float:
    """Exact ``P[exists i<j: X_i = X_j]`` for independent ``X_i ~ D_i`` by enumeration."""
    P = [as_distribution(d, 1e-9) for d in dists]
    K = len(P)
    if K <= 1:
        return 0.0
    n = P[0].size
    if n ** K > budget:
        raise PreconditionError(f"{n}^{K} outcomes exceeds the enumeration budget {budget}")
    # DP over draws keyed by the set of used values (distinct-tuples mass)
    frontier = {(): 1.0}
    for k in range(K):
        nxt: dict[tuple, float] = {}
        for used, w in frontier.items():
            for x in range(n):
                if x in used or P[k][x] == 0:
                    continue
                key = tuple(sorted(used + (x,)))
                nxt[key] = nxt.get(key, 0.0) + w * P[k][x]
        frontier = nxt
    return float(1.0 - sum(frontier.values()))


def _any_collision(samples: np.ndarray) -> np.ndarray:
    s = np.sort(samples, axis=1)
    return np.any(s[:, 1:] == s[:, :-1], axis=1)


def sample_independent(dists: np.ndarray, trials: int, rng: np.random.Generator) -> np.ndarray:
    """``(trials, K)`` samples with ``X_k ~ dists[k]`` drawn independently."""
    cdf = np.cumsum(dists, axis=1)
    u = rng.random((trials, dists.shape[0]))
    out = np.empty(u.shape, dtype=np.int64)
    for k in range(dists.shape[0]):
        out[:, k] = np.searchsorted(cdf[k], u[:, k] * cdf[k, -1], side="right")
    return np.minimum(out, dists.shape[1] - 1)


MERSENNE_31 = (1 << 31) - 1


def sample_four_wise(dists: np.ndarray, trials: int, rng: np.random.Generator) -> np.ndarray:
    """Samples that are only 4-wise independent across the K coordinates.

    Each trial draws a random cubic polynomial ``h`` over ``F_p`` with
    ``p = 2^31 - 1``; coordinate ``k`` uses ``u_k = h(k+1)/p`` pushed through
    the inverse CDF of ``dists[k]``.  Values of a random cubic at four distinct
    points are independent and uniform on ``F_p``.
    """
    K = dists.shape[0]
    if K >= MERSENNE_31:
        raise PreconditionError("too many coordinates for the prime field")
    p = np.int64(MERSENNE_31)
    coef = rng.integers(0, MERSENNE_31, size=(trials, 4), dtype=np.int64)
    xs = np.arange(1, K + 1, dtype=np.int64)
    h = np.broadcast_to(coef[:, 3:4], (trials, K)).copy()
    for j in (2, 1, 0):
        h = (h * xs[None, :]) % p
        h = (h + coef[:, j:j + 1]) % p
    u = h.astype(np.float64) / float(MERSENNE_31)
    cdf = np.cumsum(dists, axis=1)
    out = np.empty((trials, K), dtype=np.int64)
    for k in range(K):
        out[:, k] = np.searchsorted(cdf[k], u[:, k] * cdf[k, -1], side="right")
    return np.minimum(out, dists.shape[1] - 1)


def birthday_collision(dists: Sequence[Sequence[float]], rng: np.random.Generator | None = None,
                       trials: int = 10_000, mode: str = "exact",
                       budget: int = 2_000_000) -> float:
    """Collision probability, exactly (``mode="exact"``) or by Monte Carlo.

    Monte-Carlo modes: ``"independent"`` (full independence) and
    ``"fourwise"`` (polynomial-hash samples).
    """
    D = np.array([as_distribution(d, 1e-9) for d in dists])
    if D.shape[0] <= 1:
        return 0.0
    if mode == "exact":
        if np.all(D == D[0]):
            return collision_prob_identical(D[0], D.shape[0])
        return collision_prob_exact(D, budget)
    if rng is None:
        raise ValueError("Monte-Carlo modes need an rng")
    sampler: Callable = sample_independent if mode == "independent" else sample_four_wise
    hits = 0
    for start in range(0, trials, 2000):
        block = min(2000, trials - start)
        hits += int(_any_collision(sampler(D, block, rng)).sum())
    return hits / trials


@dataclass(frozen=True)
class BirthdayIntermediates:
    n: int
    K: int
    EY: float
    lemma_bound: float         # C(K,2)(1 - 1/10)^2 / n
    stated_floor: float        # 900
    tau2: float
    tau3: float
    tau4: float
    tau3_bound: float          # 6 sqrt 2 (E[Y]^2/40 + 12 E[Y])
    chebyshev_bound: float     # (1 + 72 sqrt 2)/E[Y] + 6 sqrt 2 / 40
    required_EY: float         # smallest E[Y] making the Chebyshev bound <= 1/2

    @property
    def lemma_bound_holds(self) -> bool:
        return self.EY >= self.lemma_bound * (1 - 1e-12)

    @property
    def stated_floor_holds(self) -> bool:
        return self.lemma_bound >= self.stated_floor

    @property
    def chain_holds(self) -> bool:
        return (self.lemma_bound_holds and self.tau3 <= self.tau3_bound * (1 + 1e-12)
                and self.chebyshev_bound <= 0.5)


def birthday_intermediates(dists: Sequence[Sequence[float]], eps: float = 0.1,
                           stated_floor: float = 900.0) -> BirthdayIntermediates:
    """Recompute the second-moment proof quantities for independent ``X_k ~ dists[k]``.

    ``tau3 = 6 sum_x e_3(p_{.,x})`` and ``tau4 = sum over disjoint pairs``;
    the Chebyshev bound uses the lemma lower bound on ``E[Y]``, as the proof does.
    """
    D = np.array([as_distribution(d, 1e-9) for d in dists])
    K, n = D.shape
    col1 = D.sum(axis=0)
    col2 = (D ** 2).sum(axis=0)
    col3 = (D ** 3).sum(axis=0)
    s_x = (col1 ** 2 - col2) / 2
    r_x = (col1 ** 3 - 3 * col1 * col2 + 2 * col3) / 6
    EY = float(s_x.sum())
    M = D @ D.T
    iu = np.triu_indices(K, 1)
    pair = M[iu]
    # ordered pairs of unordered pairs: subtract identical pairs and pairs sharing one index
    row = M.sum(axis=1) - np.diag(M)
    share_one = float((row ** 2).sum() - 2 * (pair ** 2).sum())
    tau4 = float(pair.sum() ** 2 - (pair ** 2).sum() - share_one)
    tau3 = 6 * float(r_x.sum())
    lemma = math.comb(K, 2) * (1 - eps) ** 2 / n
    cheb = (1 + 72 * math.sqrt(2)) / lemma + 6 * math.sqrt(2) / 40
    required = (1 + 72 * math.sqrt(2)) / (0.5 - 6 * math.sqrt(2) / 40)
    return BirthdayIntermediates(n, K, EY, lemma, stated_floor, EY, tau3, tau4,
                                 6 * math.sqrt(2) * (EY ** 2 / 40 + 12 * EY), cheb, required)


def perturbed_family(n: int, K: int, eps: float, rng: np.random.Generator,
                     base: np.ndarray | None = None) -> np.ndarray:
    """K distributions over [n] within variation ``eps`` of each other.

    Each is a mixture ``(1 - eps/2) base + (eps/2) noise_k``, so every pair is
    at variation at most ``eps/2 * ||noise_k - noise_l|| <= eps/2``.
    """
    if base is None:
        base = rng.dirichlet(np.ones(n))
    noise = rng.dirichlet(np.ones(n), size=K)
    return (1 - eps / 2) * base[None, :] + (eps / 2) * noise
