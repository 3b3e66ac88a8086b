"""Pure states over [N], proper-state encoding, matching measurements and
the nonuniformity / impropriety functionals."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

NORM_TOL = 1e-12
NORM_REJECT = 1e-6
STATE_FORMAT = "qmasat-state/1"


class StateError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class StateVector:
    """Unit vector in C^N.

    Construction renormalizes, but refuses inputs whose norm is off by more
    than ``NORM_REJECT``: such a vector is a caller bug, not rounding noise.
    """

    amps: np.ndarray

    def __post_init__(self):
        a = np.array(self.amps, dtype=np.complex128).reshape(-1)
        if a.size < 1:
            raise StateError("state needs N >= 1")
        norm = float(np.linalg.norm(a))
        if abs(norm - 1.0) > NORM_REJECT:
            raise StateError(f"norm {norm!r} deviates from 1 by more than {NORM_REJECT}")
        a = a / norm
        a.setflags(write=False)
        object.__setattr__(self, "amps", a)

    @property
    def dim(self) -> int:
        return self.amps.shape[0]

    @classmethod
    def normalized(cls, v) -> "StateVector":
        v = np.asarray(v, dtype=np.complex128).reshape(-1)
        n = np.linalg.norm(v)
        if n == 0:
            raise StateError("cannot normalize the zero vector")
        return cls(v / n)

    def probs(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def dumps(self) -> str:
        lines = [f"{STATE_FORMAT} dim {self.dim}"]
        lines += [f"{z.real:.17g} {z.imag:.17g}" for z in self.amps]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "StateVector":
        rows = text.strip().splitlines()
        head = rows[0].split()
        if len(head) != 3 or head[0] != STATE_FORMAT or head[1] != "dim":
            raise StateError(f"bad state header {rows[0]!r}")
        n = int(head[2])
        if len(rows) - 1 != n:
            raise StateError(f"header says dim {n}, found {len(rows) - 1} rows")
        vals = np.array([[float(x) for x in r.split()] for r in rows[1:]])
        out = cls.__new__(cls)
        a = vals[:, 0] + 1j * vals[:, 1]
        a.setflags(write=False)
        # bypass renormalization so the round trip is bit-exact
        object.__setattr__(out, "amps", a)
        return out


def random_state(N: int, rng: np.random.Generator) -> StateVector:
    """Haar-random pure state."""
    return StateVector.normalized(rng.normal(size=N) + 1j * rng.normal(size=N))


def _check_dims(a: StateVector, b: StateVector) -> None:
    if a.dim != b.dim:
        raise StateError(f"dimension mismatch {a.dim} vs {b.dim}")


def proper_state(a: Sequence[int], N: int | None = None) -> StateVector:
    bits = np.asarray(a, dtype=np.int64).reshape(-1)
    if N is not None and bits.size != N:
        raise StateError(f"assignment has {bits.size} bits, expected {N}")
    if np.any((bits != 0) & (bits != 1)):
        raise StateError("assignment bits must be 0/1")
    return StateVector((1.0 - 2.0 * bits) / math.sqrt(bits.size))


def inner(a: StateVector, b: StateVector) -> complex:
    _check_dims(a, b)
    return complex(np.vdot(a.amps, b.amps))


def fidelity(a: StateVector, b: StateVector) -> float:
    return min(1.0, abs(inner(a, b)) ** 2)


def trace_distance_pure(a: StateVector, b: StateVector) -> float:
    return math.sqrt(max(0.0, 1.0 - fidelity(a, b)))


def swap_test_prob(a: StateVector, b: StateVector) -> float:
    return (1.0 + fidelity(a, b)) / 2.0


def swap_test(a: StateVector, b: StateVector, rng: np.random.Generator) -> bool:
    return bool(rng.random() < swap_test_prob(a, b))


# Nonuniformity and impropriety ------------------------------------------------

def nonuniformity(s: StateVector) -> float:
    return 0.5 * float(np.sum(np.abs(s.probs() - 1.0 / s.dim)))


def _imp_objective(sq: np.ndarray, thetas: np.ndarray, N: int) -> np.ndarray:
    r = np.exp(1j * thetas) / N
    return np.abs(sq[:, None] - r[None, :]).sum(axis=0)


def impropriety_phase(s: StateVector, grid: int = 4096, tol: float = 1e-10,
                      chunk: int = 256) -> tuple[float, float]:
    """Return ``(imp, theta)`` minimizing ``sum_i |alpha_i^2 - e^{i theta}/N|``.

    Dense grid on [0, 2pi) followed by golden-section refinement inside the
    bracket around the best grid point.
    """
    N = s.dim
    sq = s.amps ** 2
    thetas = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
    vals = np.concatenate([
        _imp_objective(sq, thetas[k:k + chunk], N) for k in range(0, grid, chunk)
    ])
    k = int(np.argmin(vals))
    h = 2 * np.pi / grid
    lo, hi = thetas[k] - h, thetas[k] + h
    f = lambda t: float(_imp_objective(sq, np.array([t]), N)[0])
    g = (math.sqrt(5) - 1) / 2
    x1, x2 = hi - g * (hi - lo), lo + g * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - g * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + g * (hi - lo)
            f2 = f(x2)
    best_t, best_v = (x1, f1) if f1 <= f2 else (x2, f2)
    if vals[k] < best_v:
        best_t, best_v = float(thetas[k]), float(vals[k])
    return best_v, best_t % (2 * np.pi)


def impropriety(s: StateVector, grid: int = 4096) -> float:
    return impropriety_phase(s, grid)[0]


def round_at_impropriety_phase(s: StateVector, grid: int = 4096) -> tuple[StateVector, float]:
    """Round ``s`` to a proper state through the impropriety-minimizing phase.

    With ``r = e^{i theta}/N`` the square roots of ``r`` are ``+-g`` for the
    principal root ``g``.  Each ``alpha_i`` is rounded to whichever of the two is
    closer, which fixes a sign vector; the proper state is that sign vector
    over ``sqrt(N)``.  The common phase of ``g`` drops out of the trace
    distance, so the branch choice does not matter.
    """
    _, theta = impropriety_phase(s, grid)
    g = np.exp(0.5j * theta)
    signs = np.where(np.real(np.conj(g) * s.amps) >= 0, 1.0, -1.0)
    p = StateVector(signs / math.sqrt(s.dim))
    return p, trace_distance_pure(p, s)


def nearest_proper(s: StateVector, grid: int = 4096) -> tuple[StateVector, float]:
    """Closest proper state to ``s`` and its trace distance.

    Takes the better of the impropriety-phase rounding and the exact
    arc-enumeration optimum of :func:`max_proper_overlap`.  The rounding alone
    is what the implem argument analyses, but on generic states it is not
    always the nearest point.
    """
    p, d = round_at_impropriety_phase(s, grid)
    _, signs = max_proper_overlap(s)
    q = StateVector(signs / math.sqrt(s.dim))
    dq = trace_distance_pure(q, s)
    return (q, dq) if dq < d else (p, d)


def max_proper_overlap(s: StateVector) -> tuple[float, np.ndarray]:
    """Exact ``max_x |<proper(x)|s>|`` and a maximizing sign vector.

    ``max_x |sum_i s_i alpha_i|`` equals ``max_theta sum_i |Re(e^{-i theta} alpha_i)|``,
    which is a sum of rectified sinusoids with period pi.  The optimal sign
    vector is constant on each arc between consecutive breakpoints
    ``arg(alpha_i) + pi/2 (mod pi)``, so trying one point per arc is exhaustive.
    """
    a = s.amps
    N = s.dim
    nz = np.abs(a) > 0
    phi = np.angle(a[nz])
    breaks = np.sort(np.mod(phi + np.pi / 2, np.pi))
    if breaks.size == 0:
        return 0.0, np.ones(N)
    nxt = np.append(breaks[1:], breaks[0] + np.pi)
    mids = 0.5 * (breaks + nxt)
    best, best_signs = -1.0, None
    for k in range(0, mids.size, 512):
        t = mids[k:k + 512]
        proj = np.real(np.exp(-1j * t)[:, None] * a[None, :])
        sg = np.where(proj >= 0, 1.0, -1.0)
        vals = np.abs(sg @ a)
        j = int(np.argmax(vals))
        if vals[j] > best:
            best, best_signs = float(vals[j]), sg[j]
    return min(1.0, best / math.sqrt(N)), best_signs


def distance_to_proper(s: StateVector) -> float:
    """Exact trace distance from ``s`` to the set of proper states.

    Computed as the norm of the part of ``s`` orthogonal to the best proper
    state, which avoids the cancellation in ``sqrt(1 - overlap^2)`` near 0.
    """
    _, signs = max_proper_overlap(s)
    p = signs / math.sqrt(s.dim)
    r = s.amps - np.vdot(p, s.amps) * p
    return min(1.0, float(np.linalg.norm(r) / np.linalg.norm(s.amps)))


# Matchings -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Matching:
    """Perfect matching on [N] stored as an ``(N/2, 2)`` array with ``i < j``."""

    edges: np.ndarray

    def __post_init__(self):
        e = np.array(self.edges, dtype=np.int64).reshape(-1, 2)
        e = np.sort(e, axis=1)
        n = 2 * e.shape[0]
        if n == 0:
            raise StateError("matching must be nonempty")
        if not np.array_equal(np.sort(e.reshape(-1)), np.arange(n)):
            raise StateError("edges must cover every index of [N] exactly once")
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)

    @property
    def N(self) -> int:
        return 2 * self.edges.shape[0]

    def key(self) -> tuple:
        return tuple(sorted(map(tuple, self.edges.tolist())))


@dataclass(frozen=True)
class MatchingOutcome:
    edge: tuple[int, int]
    sign: int  # +1 or -1


def _check_matching(s: StateVector, m: Matching) -> None:
    if s.dim % 2:
        raise StateError("matching measurements need even N")
    if m.N != s.dim:
        raise StateError(f"matching on {m.N} points, state has dim {s.dim}")


def matching_distribution(s: StateVector, m: Matching) -> np.ndarray:
    """``(N/2, 2)`` array: column 0 is ``P[(i,j),+]``, column 1 is ``P[(i,j),-]``."""
    _check_matching(s, m)
    ai, aj = s.amps[m.edges[:, 0]], s.amps[m.edges[:, 1]]
    return np.stack([np.abs(ai + aj) ** 2 / 2, np.abs(ai - aj) ** 2 / 2], axis=1)


def sample_matching_outcomes(s: StateVector, m: Matching, rng: np.random.Generator,
                             size: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``size`` independent outcomes; returns ``(edge_index, sign)`` arrays."""
    p = matching_distribution(s, m).reshape(-1)
    cdf = np.cumsum(p)
    u = rng.random(size) * cdf[-1]
    flat = np.minimum(np.searchsorted(cdf, u, side="right"), p.size - 1)
    return flat // 2, np.where(flat % 2 == 0, 1, -1)


def measure_matching(s: StateVector, m: Matching, rng: np.random.Generator) -> MatchingOutcome:
    e, sg = sample_matching_outcomes(s, m, rng, 1)
    i, j = m.edges[int(e[0])]
    return MatchingOutcome((int(i), int(j)), int(sg[0]))
