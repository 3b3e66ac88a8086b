"""SAT instances, evaluation, generators and exact max-SAT oracles.

Literals are ``(var, negated)`` pairs with 0-based variable indices.  A
3SAT clause is satisfied when at least one literal is true; a 2-in-4
clause is satisfied when exactly two of its four literals are true.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

Literal = tuple[int, bool]
Clause = tuple[Literal, ...]

DEFAULT_BRUTE_FORCE_CAP = 24
DEFAULT_ELIMINATION_WIDTH_CAP = 24


class InstanceError(ValueError):
    """Malformed instance or mismatched assignment."""


class ParseError(InstanceError):
    pass


class CapExceededError(RuntimeError):
    """Refusal to start an exponential computation above the configured cap."""


def _normalize_clause(clause, arity: int, num_vars: int) -> Clause:
    lits = tuple((int(v), bool(neg)) for v, neg in clause)
    if len(lits) != arity:
        raise InstanceError(f"clause {clause!r} has {len(lits)} literals, expected {arity}")
    vs = [v for v, _ in lits]
    if len(set(vs)) != arity:
        raise InstanceError(f"clause {clause!r} repeats a variable")
    for v in vs:
        if not 0 <= v < num_vars:
            raise InstanceError(f"variable {v} out of range [0, {num_vars})")
    return lits


@dataclass(frozen=True)
class ThreeSatInstance:
    num_vars: int
    clauses: tuple[Clause, ...] = ()

    def __post_init__(self):
        if self.num_vars < 1:
            raise InstanceError("num_vars must be positive")
        object.__setattr__(
            self, "clauses", tuple(_normalize_clause(c, 3, self.num_vars) for c in self.clauses)
        )

    @property
    def m(self) -> int:
        return len(self.clauses)


@dataclass(frozen=True)
class TwoOutOfFourInstance:
    num_vars: int
    clauses: tuple[Clause, ...] = ()
    max_occurrence: int = field(default=-1)

    def __post_init__(self):
        if self.num_vars < 1:
            raise InstanceError("num_vars must be positive")
        clauses = tuple(_normalize_clause(c, 4, self.num_vars) for c in self.clauses)
        object.__setattr__(self, "clauses", clauses)
        true_max = int(occurrence_counts(self).max()) if self.num_vars else 0
        if self.max_occurrence == -1:
            object.__setattr__(self, "max_occurrence", true_max)
        elif self.max_occurrence != true_max:
            raise InstanceError(
                f"declared max_occurrence {self.max_occurrence} != actual {true_max}"
            )

    @property
    def m(self) -> int:
        return len(self.clauses)


Instance = Union[ThreeSatInstance, TwoOutOfFourInstance]


def occurrence_counts(inst: Instance) -> np.ndarray:
    counts = np.zeros(inst.num_vars, dtype=np.int64)
    for clause in inst.clauses:
        for v, _ in clause:
            counts[v] += 1
    return counts


def _as_bits(a: Sequence[int], n: int) -> np.ndarray:
    bits = np.asarray(a, dtype=np.int64).ravel()
    if bits.shape[0] != n:
        raise InstanceError(f"assignment has {bits.shape[0]} bits, instance has {n} variables")
    if np.any((bits != 0) & (bits != 1)):
        raise InstanceError("assignment bits must be 0 or 1")
    return bits


def _clause_arrays(inst: Instance) -> tuple[np.ndarray, np.ndarray]:
    width = 3 if isinstance(inst, ThreeSatInstance) else 4
    if not inst.clauses:
        return np.zeros((0, width), np.int64), np.zeros((0, width), np.int64)
    var = np.array([[v for v, _ in c] for c in inst.clauses], dtype=np.int64)
    neg = np.array([[int(n) for _, n in c] for c in inst.clauses], dtype=np.int64)
    return var, neg


def literal_values(inst: Instance, a: Sequence[int]) -> np.ndarray:
    """Truth value (0/1) of every literal, shape ``(m, arity)``."""
    bits = _as_bits(a, inst.num_vars)
    var, neg = _clause_arrays(inst)
    return bits[var] ^ neg


def eval_3sat(inst: ThreeSatInstance, a: Sequence[int]) -> float:
    lv = literal_values(inst, a)
    if inst.m == 0:
        return 1.0
    return float(np.count_nonzero(lv.sum(axis=1) >= 1)) / inst.m


def eval_2in4(inst: TwoOutOfFourInstance, a: Sequence[int]) -> float:
    lv = literal_values(inst, a)
    if inst.m == 0:
        return 1.0
    return float(np.count_nonzero(lv.sum(axis=1) == 2)) / inst.m


def evaluate(inst: Instance, a: Sequence[int]) -> float:
    if isinstance(inst, ThreeSatInstance):
        return eval_3sat(inst, a)
    return eval_2in4(inst, a)


def _clause_ok(inst: Instance, true_counts: np.ndarray) -> np.ndarray:
    if isinstance(inst, ThreeSatInstance):
        return true_counts >= 1
    return true_counts == 2


def brute_force_max_sat(inst: Instance, cap: int = DEFAULT_BRUTE_FORCE_CAP,
                        chunk_bits: int = 18) -> tuple[float, tuple[int, ...]]:
    """Exact maximum satisfied fraction over all ``2**num_vars`` assignments.

    Ties go to the lexicographically smallest assignment ``(a_0, a_1, ...)``.
    Assignments are enumerated as integers whose most significant bit is
    ``a_0``, so integer order is lexicographic order.
    """
    n = inst.num_vars
    if n > cap:
        raise CapExceededError(f"{n} variables exceeds brute-force cap {cap}")
    if inst.m == 0:
        return 1.0, (0,) * n
    var, neg = _clause_arrays(inst)
    shifts = (n - 1 - var).astype(np.uint64)
    total = 1 << n
    step = 1 << min(chunk_bits, n)
    best_count, best_idx = -1, 0
    for start in range(0, total, step):
        idx = np.arange(start, min(start + step, total), dtype=np.uint64)
        sat = np.zeros(idx.shape[0], dtype=np.int32)
        for c in range(inst.m):
            tc = np.zeros(idx.shape[0], dtype=np.int8)
            for k in range(var.shape[1]):
                bit = ((idx >> shifts[c, k]) & np.uint64(1)).astype(np.int8)
                tc += bit ^ np.int8(neg[c, k])
            sat += _clause_ok(inst, tc)
        j = int(np.argmax(sat))
        if sat[j] > best_count:
            best_count, best_idx = int(sat[j]), start + j
        if best_count == inst.m:
            break
    bits = tuple((best_idx >> (n - 1 - v)) & 1 for v in range(n))
    return best_count / inst.m, bits


def _clause_table(clause: Clause, kind: str) -> np.ndarray:
    arity = len(clause)
    grid = np.indices((2,) * arity).reshape(arity, -1).T
    negs = np.array([int(n) for _, n in clause])
    cnt = (grid ^ negs).sum(axis=1)
    ok = cnt >= 1 if kind == "3sat" else cnt == 2
    return ok.astype(np.int32).reshape((2,) * arity)


def exact_max_sat(inst: Instance, width_cap: int = DEFAULT_ELIMINATION_WIDTH_CAP
                  ) -> tuple[float, tuple[int, ...]]:
    """Exact maximum satisfied fraction by max-sum variable elimination.

    Same value as :func:`brute_force_max_sat`; the cost is exponential in the
    induced width of the elimination order (greedy min-degree) rather than in
    ``num_vars``.  The returned argmax is *an* optimum, not necessarily the
    lexicographically smallest one.
    """
    n = inst.num_vars
    if inst.m == 0:
        return 1.0, (0,) * n
    kind = "3sat" if isinstance(inst, ThreeSatInstance) else "2in4"
    factors: list[tuple[tuple[int, ...], np.ndarray]] = []
    for clause in inst.clauses:
        factors.append((tuple(v for v, _ in clause), _clause_table(clause, kind)))

    neighbours: dict[int, set[int]] = {v: set() for v in range(n)}
    for scope, _ in factors:
        for v in scope:
            neighbours[v].update(u for u in scope if u != v)

    remaining = set(range(n))
    trace: list[tuple[int, tuple[int, ...], np.ndarray]] = []
    while remaining:
        v = min(remaining, key=lambda u: (len(neighbours[u]), u))
        mine = [f for f in factors if v in f[0]]
        factors = [f for f in factors if v not in f[0]]
        scope = tuple(sorted(set().union(*(f[0] for f in mine)))) if mine else (v,)
        if len(scope) > width_cap:
            raise CapExceededError(
                f"elimination width {len(scope)} exceeds cap {width_cap}"
            )
        table = np.zeros((2,) * len(scope), dtype=np.int32)
        for fscope, ftable in mine:
            table = table + _expand(ftable, fscope, scope)
        axis = scope.index(v)
        rest = scope[:axis] + scope[axis + 1:]
        trace.append((v, rest, np.argmax(table, axis=axis).astype(np.int8)))
        factors.append((rest, table.max(axis=axis)))
        for u in neighbours[v]:
            neighbours[u].discard(v)
            neighbours[u].update(w for w in neighbours[v] if w != u)
        remaining.discard(v)
        del neighbours[v]

    best = int(sum(int(t) for s, t in factors if s == ()))
    bits = [0] * n
    for v, rest, arg in reversed(trace):
        bits[v] = int(arg[tuple(bits[u] for u in rest)]) if rest else int(arg)
    return best / inst.m, tuple(bits)


def _expand(table: np.ndarray, scope: tuple[int, ...], target: tuple[int, ...]) -> np.ndarray:
    order = sorted(range(len(scope)), key=lambda k: target.index(scope[k]))
    t = np.transpose(table, order)
    shape = [1] * len(target)
    for k in order:
        shape[target.index(scope[k])] = 2
    return t.reshape(shape)


def random_3sat(n: int, m: int, seed) -> ThreeSatInstance:
    if n < 3:
        raise InstanceError("random_3sat needs n >= 3")
    rng = np.random.default_rng(seed)
    clauses = []
    for _ in range(m):
        vs = rng.choice(n, size=3, replace=False)
        negs = rng.integers(0, 2, size=3)
        clauses.append(tuple((int(v), bool(s)) for v, s in zip(vs, negs)))
    return ThreeSatInstance(n, tuple(clauses))


def random_2in4(N: int, M: int, c: int, seed) -> TwoOutOfFourInstance:
    """Random 2-in-4 instance in which no variable occurs more than ``c`` times."""
    if N < 4:
        raise InstanceError("random_2in4 needs N >= 4")
    if 4 * M > c * N:
        raise InstanceError(f"{M} clauses cannot fit into N={N} with occurrence cap {c}")
    rng = np.random.default_rng(seed)
    counts = np.zeros(N, dtype=np.int64)
    clauses = []
    for _ in range(M):
        free = np.flatnonzero(counts < c)
        if free.size < 4:
            raise InstanceError("ran out of variables under the occurrence cap")
        vs = rng.choice(free, size=4, replace=False)
        counts[vs] += 1
        negs = rng.integers(0, 2, size=4)
        clauses.append(tuple((int(v), bool(s)) for v, s in zip(vs, negs)))
    return TwoOutOfFourInstance(N, tuple(clauses))


# DIMACS-like text format ---------------------------------------------------

def _format_clause(clause: Clause) -> str:
    return " ".join(str(-(v + 1) if neg else v + 1) for v, neg in clause)


def dumps_instance(inst: Instance) -> str:
    if isinstance(inst, ThreeSatInstance):
        lines = [f"p 3sat {inst.num_vars} {inst.m}"]
    else:
        lines = [f"p 2in4 {inst.num_vars} {inst.m} {inst.max_occurrence}"]
    lines.extend(_format_clause(c) for c in inst.clauses)
    return "\n".join(lines) + "\n"


def loads_instance(text: str) -> Instance:
    header = None
    rows: list[list[int]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            if header is not None:
                raise ParseError(f"line {lineno}: duplicate header")
            header = line.split()
            continue
        if header is None:
            raise ParseError(f"line {lineno}: clause before header")
        try:
            toks = [int(t) for t in line.split()]
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
        if toks and toks[-1] == 0:
            toks = toks[:-1]
        if any(t == 0 for t in toks):
            raise ParseError(f"line {lineno}: literal 0 is not a variable")
        rows.append(toks)
    if header is None:
        raise ParseError("missing header line")
    kind = header[1] if len(header) > 1 else ""
    try:
        nums = [int(t) for t in header[2:]]
    except ValueError:
        raise ParseError(f"bad header {' '.join(header)!r}") from None
    if kind == "3sat" and len(nums) == 2:
        n, m = nums
        arity = 3
    elif kind == "2in4" and len(nums) == 3:
        n, m, c = nums
        arity = 4
    else:
        raise ParseError(f"bad header {' '.join(header)!r}")
    if len(rows) != m:
        raise ParseError(f"header declares {m} clauses, found {len(rows)}")
    clauses = []
    for k, toks in enumerate(rows):
        if len(toks) != arity:
            raise ParseError(f"clause {k + 1} has {len(toks)} literals, {kind} needs {arity}")
        clauses.append(tuple((abs(t) - 1, t < 0) for t in toks))
    try:
        if arity == 3:
            return ThreeSatInstance(n, tuple(clauses))
        return TwoOutOfFourInstance(n, tuple(clauses), max_occurrence=c)
    except InstanceError as exc:
        raise ParseError(str(exc)) from None
