"""Entanglement-of-formation toolbox at two-qubit scale, the faithfulness and
measurement-growth checks, and the amplification protocol skeletons."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import binom

from .analysis import PreconditionError
from .merlin import WitnessBundle
from .quantum_state import StateError, StateVector, swap_test
from .verifier import TestReport

HERM_TOL = 1e-10
PSD_TOL = 1e-10
SIGMA_Y = np.array([[0, -1j], [1j, 0]])
YY = np.kron(SIGMA_Y, SIGMA_Y)
BELL_PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)


class DimensionError(ValueError):
    """Exact E_F is only available for two qubits."""


@dataclass(frozen=True, eq=False)
class TwoQubitDensity:
    rho: np.ndarray

    def __post_init__(self):
        r = np.array(self.rho, dtype=np.complex128)
        if r.shape != (4, 4):
            raise DimensionError(f"dimension unsupported for exact E_F: shape {r.shape}")
        if np.abs(r - r.conj().T).max() > HERM_TOL:
            raise StateError("density matrix is not Hermitian")
        if abs(np.trace(r).real - 1.0) > HERM_TOL:
            raise StateError("density matrix does not have unit trace")
        r = (r + r.conj().T) / 2
        if np.linalg.eigvalsh(r).min() < -PSD_TOL:
            raise StateError("density matrix is not positive semidefinite")
        r.setflags(write=False)
        object.__setattr__(self, "rho", r)

    @classmethod
    def pure(cls, psi) -> "TwoQubitDensity":
        v = np.asarray(psi, dtype=np.complex128).reshape(4)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    def dumps(self) -> str:
        rows = ["qmasat-density/1 dim 4"]
        rows += [" ".join(f"{z.real:.17g} {z.imag:.17g}" for z in row) for row in self.rho]
        return "\n".join(rows) + "\n"


def random_density(rng: np.random.Generator, rank: int = 4) -> TwoQubitDensity:
    """Random two-qubit density ``G G^dag / tr`` with ``G`` a complex Ginibre 4 x rank matrix."""
    G = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    r = G @ G.conj().T
    return TwoQubitDensity(r / np.trace(r).real)


def werner(p: float) -> TwoQubitDensity:
    return TwoQubitDensity(p * np.outer(BELL_PHI_PLUS, BELL_PHI_PLUS.conj()) + (1 - p) * np.eye(4) / 4)


def binary_entropy(x: float) -> float:
    if x <= 0 or x >= 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def concurrence(rho: TwoQubitDensity) -> float:
    """Wootters concurrence.

    The lambdas are the singular values of ``sqrt(rho) YY conj(sqrt(rho))``,
    which equal the square roots of the eigenvalues of ``rho YY rho* YY`` but
    avoid square-rooting tiny, noisy eigenvalues of a non-Hermitian product.
    """
    w, V = np.linalg.eigh(rho.rho)
    s = (V * np.sqrt(np.clip(w, 0, None))) @ V.conj().T
    lam = np.linalg.svd(s @ YY @ s.conj(), compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def ef_two_qubit(rho: TwoQubitDensity) -> float:
    """Entanglement of formation in bits via the concurrence closed form."""
    C = min(1.0, concurrence(rho))
    return binary_entropy((1 + math.sqrt(max(0.0, 1 - C * C))) / 2)


def ef_vanishes(rho: TwoQubitDensity, tol: float = 1e-8) -> bool:
    """Whether E_F is zero, decided on the concurrence.

    E_F is a strictly increasing function of C that behaves like
    ``C^2 log(1/C)`` near 0, so thresholding E_F itself would call states with
    ``C ~ 1e-5`` separable.
    """
    return concurrence(rho) <= tol


def entanglement_entropy(psi: np.ndarray, dA: int, dB: int) -> float:
    """Von Neumann entropy (bits) of the A marginal of a bipartite pure state."""
    s = np.linalg.svd(np.asarray(psi, dtype=np.complex128).reshape(dA, dB), compute_uv=False)
    p = s ** 2
    p = p[p > 1e-300] / p.sum()
    return float(max(0.0, -(p * np.log2(p)).sum()))


def superadditivity_slack(psi: np.ndarray) -> tuple[float, float, float]:
    """``E_F(A1A2 : B1B2) - E_F(A1 : B1) - E_F(A2 : B2)`` for a pure four-qubit state.

    Qubits are ordered ``(A1, A2, B1, B2)``.  The joint E_F of a pure state is
    its entanglement entropy and each pair marginal is a two-qubit density, so
    every term is exact.  Returns ``(slack, joint, pair_sum)``.
    """
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    if psi.size != 16:
        raise DimensionError("need a pure state on four qubits")
    psi = psi / np.linalg.norm(psi)
    T = psi.reshape(2, 2, 2, 2)
    r1 = np.einsum("axby,cxdy->abcd", T, T.conj()).reshape(4, 4)   # A1 B1
    r2 = np.einsum("xayb,xcyd->abcd", T, T.conj()).reshape(4, 4)   # A2 B2
    joint = entanglement_entropy(psi, 4, 4)
    pair = ef_two_qubit(TwoQubitDensity(r1)) + ef_two_qubit(TwoQubitDensity(r2))
    return joint - pair, joint, pair


def partial_transpose(r: np.ndarray) -> np.ndarray:
    return np.asarray(r).reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)


def ppt_min_eig(rho: TwoQubitDensity) -> float:
    return float(np.linalg.eigvalsh(partial_transpose(rho.rho)).min())


def ppt_separable(rho: TwoQubitDensity, tol: float = 1e-10) -> bool:
    return ppt_min_eig(rho) >= -tol


def trace_distance(r: np.ndarray, s: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.linalg.eigvalsh(np.asarray(r) - np.asarray(s))).sum())


def werner_threshold(tol: float = 1e-12) -> float:
    """Bisect for the largest Werner weight that still passes the PPT test."""
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if ppt_min_eig(werner(mid)) >= 0:
            lo = mid
        else:
            hi = mid
    return lo


# Nearest separable state -----------------------------------------------------------

@dataclass(frozen=True)
class SeparableCertificate:
    sigma: np.ndarray
    distance: float
    solver_distance: float
    mixing: float


def nearest_separable(rho: TwoQubitDensity, solver: str = "CLARABEL") -> SeparableCertificate:
    """Minimize trace distance to the PPT (= separable at 2x2) set by SDP.

    The solver's optimum is mixed with ``I/4`` by the smallest amount that
    makes it exactly PSD and PPT under ``eigvalsh``; the reported distance is
    recomputed for that repaired state, so it is always an upper bound
    realized by a genuinely separable state.
    """
    import cvxpy as cp

    if ppt_separable(rho, tol=0.0):
        return SeparableCertificate(rho.rho.copy(), 0.0, 0.0, 0.0)
    S = cp.Variable((4, 4), hermitian=True)
    P = cp.Variable((4, 4), hermitian=True)
    Q = cp.Variable((4, 4), hermitian=True)
    cons = [S >> 0, cp.real(cp.trace(S)) == 1,
            cp.partial_transpose(S, dims=[2, 2], axis=1) >> 0,
            P >> 0, Q >> 0, rho.rho - S == P - Q]
    prob = cp.Problem(cp.Minimize(0.5 * cp.real(cp.trace(P + Q))), cons)
    prob.solve(solver=solver)
    if S.value is None:
        raise RuntimeError(f"SDP failed with status {prob.status}")
    sig = (S.value + S.value.conj().T) / 2
    sig = sig / np.trace(sig).real
    t = 0.0
    for _ in range(60):
        cand = (1 - t) * sig + t * np.eye(4) / 4
        if np.linalg.eigvalsh(cand).min() >= 0 and np.linalg.eigvalsh(partial_transpose(cand)).min() >= 0:
            sig = cand
            break
        t = max(2 * t, 1e-12)
    else:
        raise RuntimeError("could not repair the SDP certificate")
    return SeparableCertificate(sig, trace_distance(rho.rho, sig), float(prob.value), t)


def werner_separable_distance(p: float) -> float:
    """Closed form: trace distance from Werner(p) to Werner(1/3), the nearest separable state."""
    return max(0.0, 0.75 * (p - 1.0 / 3.0))


@dataclass(frozen=True)
class EflemCheck:
    ef: float
    distance: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.distance <= self.bound + 1e-9


def check_eflem(rho: TwoQubitDensity, eps: float) -> EflemCheck:
    ef = ef_two_qubit(rho)
    if ef > eps:
        raise PreconditionError(f"E_F = {ef:.6g} exceeds eps = {eps}")
    cert = nearest_separable(rho)
    return EflemCheck(ef, cert.distance, math.sqrt(2 * eps))


# Measurement growth --------------------------------------------------------------

@dataclass(frozen=True)
class TwoNCheck:
    ef_before: float
    ef_after: float
    bound: float
    probability: float

    @property
    def holds(self) -> bool:
        return self.ef_after <= self.ef_before + self.bound + 1e-9


def check_measurement(elements: Sequence[Sequence[np.ndarray]], dim: int, tol: float = 1e-9) -> None:
    total = np.zeros((dim, dim), dtype=complex)
    for outcome in elements:
        for E in outcome:
            E = np.asarray(E)
            if E.shape != (dim, dim):
                raise StateError(f"Kraus operator has shape {E.shape}, expected {(dim, dim)}")
            total += E.conj().T @ E
    if np.linalg.eigvalsh(total).max() > 1 + tol:
        raise StateError("measurement elements violate sum E^dag E <= I")


def _apply_local(psi: np.ndarray, E: np.ndarray, qa: int, qb: int, n: int) -> np.ndarray:
    """Apply ``E`` to the first ``n`` qubits of A together with the first ``n`` of B."""
    t = psi.reshape(2 ** n, 2 ** (qa - n), 2 ** n, 2 ** (qb - n)).transpose(0, 2, 1, 3)
    t = (E @ t.reshape(4 ** n, -1)).reshape(2 ** n, 2 ** n, 2 ** (qa - n), 2 ** (qb - n))
    return t.transpose(0, 2, 1, 3).reshape(-1)


def check_2nlem(psi_a: np.ndarray, psi_b: np.ndarray, elements: Sequence[Sequence[np.ndarray]],
                outcome: int, n: int = 1) -> TwoNCheck:
    """Condition a product pure state on one outcome of a measurement on ``n`` qubits per side.

    One Kraus operator per outcome leaves a pure state, whose E_F is its
    entanglement entropy at any register size.  Several Kraus operators per
    outcome give a mixed state, handled exactly only for one qubit per side.
    """
    psi_a = np.asarray(psi_a, dtype=complex).reshape(-1)
    psi_b = np.asarray(psi_b, dtype=complex).reshape(-1)
    qa, qb = int(round(math.log2(psi_a.size))), int(round(math.log2(psi_b.size)))
    if 2 ** qa != psi_a.size or 2 ** qb != psi_b.size or min(qa, qb) < n:
        raise StateError("registers must be qubit registers with at least n qubits")
    check_measurement(elements, 4 ** n)
    psi = np.kron(psi_a / np.linalg.norm(psi_a), psi_b / np.linalg.norm(psi_b))
    outs = [_apply_local(psi, np.asarray(E), qa, qb, n) for E in elements[outcome]]
    prob = float(sum(np.vdot(o, o).real for o in outs))
    if prob <= 1e-14:
        raise PreconditionError("outcome has zero probability")
    if len(outs) == 1:
        ef = entanglement_entropy(outs[0] / math.sqrt(prob), 2 ** qa, 2 ** qb)
    elif qa == 1 and qb == 1:
        r = sum(np.outer(o, o.conj()) for o in outs) / prob
        ef = ef_two_qubit(TwoQubitDensity(r))
    else:
        raise DimensionError("mixed post-measurement states need one qubit per side")
    return TwoNCheck(0.0, ef, 2.0 * n, prob)


def random_rank1_measurement(rng: np.random.Generator, dim: int = 4) -> list[list[np.ndarray]]:
    """Complete measurement ``{|w_k><u_k|}`` with ``u_k`` a random orthonormal basis."""
    Z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    U, _ = np.linalg.qr(Z)
    out = []
    for k in range(dim):
        w = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        w /= np.linalg.norm(w)
        out.append([np.outer(w, U[:, k].conj())])
    return out


# Abstract verifiers and amplification -----------------------------------------------

@dataclass
class AbstractVerifier:
    """Black-box verifier: ``accept_prob(witnesses)`` in [0, 1] for a k-tuple."""

    accept_prob: Callable[[tuple], float]
    k: int
    dim: int
    name: str = "verifier"

    def __call__(self, witnesses: tuple) -> float:
        p = float(self.accept_prob(tuple(witnesses)))
        if not -1e-12 <= p <= 1 + 1e-12:
            raise ValueError(f"verifier returned {p} outside [0, 1]")
        return min(1.0, max(0.0, p))

    def run(self, witnesses: tuple, rng: np.random.Generator) -> bool:
        return bool(rng.random() < self(witnesses))


def bernoulli_verifier(p_accept: float, k: int = 1, dim: int = 1) -> AbstractVerifier:
    return AbstractVerifier(lambda w: p_accept, k, dim, f"bernoulli({p_accept})")


@dataclass
class AmplifiedVerifier:
    inner: AbstractVerifier
    a: float
    b: float
    p: int
    m: int
    d: float
    C: float = field(init=False)

    def __post_init__(self):
        self.C = self.m * (self.b - self.a) ** 2 / self.p

    @property
    def threshold(self) -> int:
        return math.ceil(self.d * self.m - 1e-12)

    def accept_prob_independent(self, per_invocation: Sequence[float]) -> float:
        """Exact accept probability when invocations accept independently."""
        probs = np.asarray(per_invocation, dtype=float)
        if probs.size != self.m:
            raise ValueError(f"need {self.m} invocation probabilities")
        if np.allclose(probs, probs[0]):
            return float(binom.sf(self.threshold - 1, self.m, probs[0]))
        dist = np.zeros(self.m + 1)
        dist[0] = 1.0
        for q in probs:
            dist[1:] = dist[1:] * (1 - q) + dist[:-1] * q
            dist[0] *= 1 - q
        return float(dist[self.threshold:].sum())

    def __call__(self, registers: Sequence[tuple]) -> float:
        return self.accept_prob_independent([self.inner(r) for r in registers])

    def run_outcomes(self, outcomes: np.ndarray) -> np.ndarray:
        """Composed verdicts from a ``(trials, m)`` 0/1 array of invocation outcomes."""
        return np.asarray(outcomes).sum(axis=-1) >= self.threshold


def one_sided_amplify(V: AbstractVerifier, a: float, b: float, p: int) -> AmplifiedVerifier:
    """Parallel repetition with threshold ``d`` strictly inside ``(a / (1 - (b - a)), b)``.

    ``m = ceil(p ln 2 / (2 (b - d)^2))`` makes the Hoeffding tail below the
    threshold at most ``2^-p`` for inner completeness ``b``.
    """
    if not (0 <= a < b < 1):
        raise PreconditionError("need 0 <= a < b < 1")
    lo = a / (1 - (b - a))
    if not lo < b:
        raise PreconditionError("the interval for d is empty")
    d = (lo + b) / 2
    m = math.ceil(p * math.log(2) / (2 * (b - d) ** 2))
    return AmplifiedVerifier(V, a, b, p, m, d)


# Protocol skeletons ------------------------------------------------------------------

def k_to_two(bundle_a: WitnessBundle, bundle_b: WitnessBundle, inner: AbstractVerifier,
             rng: np.random.Generator) -> TestReport:
    if bundle_a.K != bundle_b.K or bundle_a.K != inner.k:
        raise StateError("both bundles need exactly k parts")
    if any(x.dim != y.dim for x, y in zip(bundle_a.witnesses, bundle_b.witnesses)):
        raise StateError("part dimensions differ between the two bundles")
    if rng.random() < 0.5:
        i = int(rng.integers(bundle_a.K))
        ok = swap_test(bundle_a.witnesses[i], bundle_b.witnesses[i], rng)
        return TestReport(ok, "swap", {"i": i})
    return TestReport(inner.run(bundle_a.witnesses, rng), "inner", {})


def sym_to_plain(bundle: WitnessBundle, inner: AbstractVerifier,
                 rng: np.random.Generator) -> TestReport:
    if bundle.K < 2:
        raise StateError("need K >= 2")
    if rng.random() < 0.5:
        k = int(rng.integers(1, bundle.K))
        ok = swap_test(bundle.witnesses[0], bundle.witnesses[k], rng)
        return TestReport(ok, "swap", {"k": k})
    return TestReport(inner.run(bundle.witnesses, rng), "inner", {})


def product_fidelities(xs: Sequence[StateVector], ys: Sequence[StateVector]) -> np.ndarray:
    return np.array([abs(np.vdot(x.amps, y.amps)) ** 2 for x, y in zip(xs, ys)])
