"""3SAT -> balanced 2-out-of-4-SAT reduction with an explicit lift.

The clause gadget follows Schaefer's 3SAT -> 1-in-3 chain,

    (l1 or l2 or l3)  ->  1in3(~l1, a, b), 1in3(b, l2, c), 1in3(c, d, ~l3)

and writes each 1-in-3 triple as a 2-in-4 clause whose fourth literal is
``~F`` for a single shared reference variable ``F``.  With ``F = 0`` the
fourth literal is true, so exactly one of the other three must hold.

A shared reference is unavoidable: a 2-in-4 clause is invariant under
complementing every variable, so no gadget over the clause variables plus
private aux variables can separate an assignment from its complement.
Completeness and soundness are therefore stated relative to ``F = 0``; any
target assignment with ``F = 1`` can be complemented wholesale.

Over-used variables are split into copies tied together by the two-clause
equality gadget ``2in4(u, ~w, p, ~q), 2in4(u, ~w, ~p, q)``, which is
satisfiable iff ``u == w`` (and then forces ``p == q``).
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .sat_core import (
    Clause,
    DEFAULT_ELIMINATION_WIDTH_CAP,
    InstanceError,
    ThreeSatInstance,
    TwoOutOfFourInstance,
    brute_force_max_sat,
    eval_2in4,
    exact_max_sat,
    occurrence_counts,
)

CERTIFICATE_SCHEMA = "qmasat.reduction-certificate/1"
DEFAULT_OCCURRENCE_CAP = 8
EQUALITY_OCCURRENCES = 4  # equality-gadget clauses touching an interior chain copy
GADGET_AUX = 4
GADGET_CLAUSES = 3


class GadgetError(RuntimeError):
    """The gadget failed its exhaustive self-check."""


class VarAllocator:
    """Hands out fresh, consecutive variable indices."""

    def __init__(self, start: int = 0):
        self.next = start

    def fresh(self, k: int = 1) -> list[int]:
        out = list(range(self.next, self.next + k))
        self.next += k
        return out


def _gadget_schema(l1, l2, l3, aux, ref) -> list[Clause]:
    a, b, c, d = aux
    v1, n1 = l1
    v2, n2 = l2
    v3, n3 = l3
    return [
        ((v1, not n1), (a, False), (b, False), (ref, True)),
        ((b, False), (v2, n2), (c, False), (ref, True)),
        ((c, False), (d, False), (v3, not n3), (ref, True)),
    ]


def _sat_2in4(clauses: Sequence[Clause], bits: dict[int, int]) -> bool:
    return all(sum(bits[v] ^ int(n) for v, n in cl) == 2 for cl in clauses)


@lru_cache(maxsize=None)
def gadget_witness_table(negs: tuple[bool, bool, bool]) -> dict[tuple[int, int, int], tuple[int, ...]]:
    """Exhaustively verify the gadget for one polarity pattern.

    Returns, for every satisfying assignment of the three clause variables,
    the lexicographically first aux assignment (reference fixed to 0) that
    satisfies every gadget clause.  Raises :class:`GadgetError` when either
    direction of the check fails, including the complemented ``F = 1`` side.
    """
    xs, aux, ref = (0, 1, 2), (3, 4, 5, 6), 7
    clauses = _gadget_schema(*zip(xs, negs), aux, ref)
    table = {}
    for x in itertools.product((0, 1), repeat=3):
        clause_true = any(xi ^ int(n) for xi, n in zip(x, negs))
        for ref_val in (0, 1):
            # with F = 1 the gadget tests the complemented clause variables
            eff = x if ref_val == 0 else tuple(1 - xi for xi in x)
            eff_true = any(xi ^ int(n) for xi, n in zip(eff, negs))
            witnesses = []
            for y in itertools.product((0, 1), repeat=GADGET_AUX):
                bits = dict(zip(xs, x)) | dict(zip(aux, y)) | {ref: ref_val}
                if _sat_2in4(clauses, bits):
                    witnesses.append(y)
            if eff_true and not witnesses:
                raise GadgetError(f"completeness fails for x={x}, F={ref_val}, negs={negs}")
            if not eff_true and witnesses:
                raise GadgetError(f"soundness fails for x={x}, F={ref_val}, negs={negs}")
            if ref_val == 0 and clause_true:
                table[x] = witnesses[0]
    return table


def verify_gadgets() -> None:
    """Run the exhaustive gadget check for all eight polarity patterns."""
    for negs in itertools.product((False, True), repeat=3):
        gadget_witness_table(negs)


def gadget_3clause_to_2in4(clause: Clause, fresh: VarAllocator, ref: int
                           ) -> tuple[list[Clause], list[int]]:
    if len({v for v, _ in clause}) != 3 or len(clause) != 3:
        raise InstanceError(f"clause {clause!r} must have 3 distinct variables")
    gadget_witness_table(tuple(bool(n) for _, n in clause))
    aux = fresh.fresh(GADGET_AUX)
    return _gadget_schema(*clause, aux, ref), aux


def equality_gadget(u: int, w: int, p: int, q: int) -> list[Clause]:
    return [
        ((u, False), (w, True), (p, False), (q, True)),
        ((u, False), (w, True), (p, True), (q, False)),
    ]


# Certificate ---------------------------------------------------------------

@dataclass(frozen=True)
class GadgetRule:
    clause: Clause
    aux: tuple[int, ...]


@dataclass
class ReductionCertificate:
    """Source/target pair plus everything needed to lift source assignments.

    ``lift`` runs in two stages.  Stage one builds the pre-balancing 2-in-4
    assignment: source variables keep their value, the reference variable is
    0 and gadget aux variables come from the verified witness table.  Stage
    two copies those values through ``balance_origin`` (``-1`` marks
    equality-gadget aux and padding, all lifted to 0).
    """

    source: ThreeSatInstance
    target: TwoOutOfFourInstance
    var_map: dict[int, tuple[int, ...]]
    aux_vars: frozenset[int]
    ref_var: int | None
    gadget_rules: tuple[GadgetRule, ...]
    intermediate_num_vars: int
    balance_origin: tuple[int, ...]
    occurrence_cap: int
    padded: bool = False
    schema: str = field(default=CERTIFICATE_SCHEMA)

    def lift(self, a: Sequence[int]) -> tuple[int, ...]:
        bits = [int(b) for b in a]
        if len(bits) != self.source.num_vars:
            raise InstanceError("assignment length does not match the source instance")
        mid = [0] * self.intermediate_num_vars
        mid[: self.source.num_vars] = bits
        for rule in self.gadget_rules:
            x = tuple(bits[v] for v, _ in rule.clause)
            table = gadget_witness_table(tuple(n for _, n in rule.clause))
            y = table.get(x, (0,) * len(rule.aux))
            for var, val in zip(rule.aux, y):
                mid[var] = val
        return tuple(mid[o] if o >= 0 else 0 for o in self.balance_origin)

    def sizes(self) -> dict:
        m = max(self.source.m, 1)
        return {
            "source_vars": self.source.num_vars,
            "source_clauses": self.source.m,
            "target_vars": self.target.num_vars,
            "target_clauses": self.target.m,
            "max_occurrence": self.target.max_occurrence,
            "occurrence_cap": self.occurrence_cap,
            "vars_per_source_clause": self.target.num_vars / m,
            "clauses_per_source_clause": self.target.m / m,
        }

    def check_invariants(self) -> None:
        images = [t for ts in self.var_map.values() for t in ts]
        everything = sorted(images + list(self.aux_vars))
        if everything != list(range(self.target.num_vars)):
            raise InstanceError("var_map images and aux_vars do not partition the target")
        if self.target.max_occurrence > self.occurrence_cap:
            raise InstanceError("target exceeds the occurrence cap")

    # serialization
    def to_dict(self) -> dict:
        def enc(clauses):
            return [[[v, int(n)] for v, n in c] for c in clauses]
        return {
            "schema": self.schema,
            "source": {"num_vars": self.source.num_vars, "clauses": enc(self.source.clauses)},
            "target": {
                "num_vars": self.target.num_vars,
                "max_occurrence": self.target.max_occurrence,
                "clauses": enc(self.target.clauses),
            },
            "var_map": {str(k): list(v) for k, v in sorted(self.var_map.items())},
            "aux_vars": sorted(self.aux_vars),
            "ref_var": self.ref_var,
            "gadget_rules": [
                {"clause": [[v, int(n)] for v, n in r.clause], "aux": list(r.aux)}
                for r in self.gadget_rules
            ],
            "intermediate_num_vars": self.intermediate_num_vars,
            "balance_origin": list(self.balance_origin),
            "occurrence_cap": self.occurrence_cap,
            "padded": self.padded,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ReductionCertificate":
        if d.get("schema") != CERTIFICATE_SCHEMA:
            raise InstanceError(f"unsupported certificate schema {d.get('schema')!r}")

        def dec(cs):
            return tuple(tuple((int(v), bool(n)) for v, n in c) for c in cs)

        src = ThreeSatInstance(d["source"]["num_vars"], dec(d["source"]["clauses"]))
        tgt = TwoOutOfFourInstance(
            d["target"]["num_vars"], dec(d["target"]["clauses"]), d["target"]["max_occurrence"]
        )
        cert = cls(
            source=src,
            target=tgt,
            var_map={int(k): tuple(v) for k, v in d["var_map"].items()},
            aux_vars=frozenset(d["aux_vars"]),
            ref_var=d["ref_var"],
            gadget_rules=tuple(
                GadgetRule(tuple((int(v), bool(n)) for v, n in r["clause"]), tuple(r["aux"]))
                for r in d["gadget_rules"]
            ),
            intermediate_num_vars=d["intermediate_num_vars"],
            balance_origin=tuple(d["balance_origin"]),
            occurrence_cap=d["occurrence_cap"],
            padded=d["padded"],
        )
        cert.check_invariants()
        return cert

    @classmethod
    def loads(cls, text: str) -> "ReductionCertificate":
        return cls.from_dict(json.loads(text))


# Balancing -----------------------------------------------------------------

def balance(inst: TwoOutOfFourInstance, c: int = DEFAULT_OCCURRENCE_CAP
            ) -> tuple[TwoOutOfFourInstance, tuple[int, ...]]:
    """Split variables occurring more than ``c`` times into equality-chained copies.

    Returns the balanced instance and ``origin``: for each output variable,
    the input variable it copies, or ``-1`` for equality-gadget aux.  Copies
    of one variable form a cycle when there are at least three of them and a
    single link when there are two.
    """
    if c < 8:
        raise InstanceError(f"occurrence cap c={c} is below the supported minimum 8")
    counts = occurrence_counts(inst)
    if counts.max(initial=0) <= c:
        return inst, tuple(range(inst.num_vars))

    per_copy = c - EQUALITY_OCCURRENCES
    alloc = VarAllocator(0)
    origin: list[int] = []
    copies: dict[int, list[int]] = {}
    for v in range(inst.num_vars):
        t = 1 if counts[v] <= c else -(-int(counts[v]) // per_copy)
        copies[v] = alloc.fresh(t)
        origin.extend([v] * t)

    used = {v: 0 for v in range(inst.num_vars)}
    new_clauses: list[Clause] = []
    for clause in inst.clauses:
        lits = []
        for v, neg in clause:
            cs = copies[v]
            lits.append((cs[used[v] // per_copy] if len(cs) > 1 else cs[0], neg))
            used[v] += 1
        new_clauses.append(tuple(lits))

    for v in range(inst.num_vars):
        cs = copies[v]
        if len(cs) == 1:
            continue
        links = list(zip(cs, cs[1:]))
        if len(cs) >= 3:
            links.append((cs[-1], cs[0]))
        for u, w in links:
            p, q = alloc.fresh(2)
            origin.extend([-1, -1])
            new_clauses.extend(equality_gadget(u, w, p, q))
    out = TwoOutOfFourInstance(alloc.next, tuple(new_clauses))
    return out, tuple(origin)


# Full reduction --------------------------------------------------------------

def gadget_stage(inst: ThreeSatInstance) -> tuple[TwoOutOfFourInstance, int | None, tuple[GadgetRule, ...]]:
    verify_gadgets()
    if inst.m == 0:
        return TwoOutOfFourInstance(inst.num_vars, ()), None, ()
    alloc = VarAllocator(inst.num_vars)
    (ref,) = alloc.fresh(1)
    clauses: list[Clause] = []
    rules = []
    for clause in inst.clauses:
        g, aux = gadget_3clause_to_2in4(clause, alloc, ref)
        clauses.extend(g)
        rules.append(GadgetRule(clause, tuple(aux)))
    return TwoOutOfFourInstance(alloc.next, tuple(clauses)), ref, tuple(rules)


def reduce_full(inst: ThreeSatInstance, c: int = DEFAULT_OCCURRENCE_CAP,
                pad_even: bool = True) -> ReductionCertificate:
    mid, ref, rules = gadget_stage(inst)
    target, origin = balance(mid, c)
    padded = False
    if pad_even and target.num_vars % 2 == 1:
        target = TwoOutOfFourInstance(target.num_vars + 1, target.clauses)
        origin = origin + (-1,)
        padded = True
    var_map: dict[int, list[int]] = {v: [] for v in range(inst.num_vars)}
    aux = []
    for t, o in enumerate(origin):
        if 0 <= o < inst.num_vars:
            var_map[o].append(t)
        else:
            aux.append(t)
    cert = ReductionCertificate(
        source=inst,
        target=target,
        var_map={k: tuple(v) for k, v in var_map.items()},
        aux_vars=frozenset(aux),
        ref_var=ref,
        gadget_rules=rules,
        intermediate_num_vars=mid.num_vars,
        balance_origin=origin,
        occurrence_cap=c,
        padded=padded,
    )
    cert.check_invariants()
    return cert


def measure_gap(cert: ReductionCertificate, width_cap: int = DEFAULT_ELIMINATION_WIDTH_CAP,
                method: str = "elimination") -> float:
    """``1 - max satisfied fraction`` of the target, computed exactly.

    ``method="brute"`` enumerates all target assignments (capped at the
    brute-force limit); the default eliminates variables exactly and is
    limited by induced width instead.
    """
    if cert.target.m == 0:
        return 0.0
    if method == "brute":
        best, _ = brute_force_max_sat(cert.target)
    else:
        best, _ = exact_max_sat(cert.target, width_cap=width_cap)
    return 1.0 - best


def lift_completeness(cert: ReductionCertificate, satisfying: Iterable[Sequence[int]]) -> float:
    """Minimum target satisfaction over lifted source assignments."""
    return min(eval_2in4(cert.target, cert.lift(a)) for a in satisfying)


def target_to_source(cert: ReductionCertificate, b: Sequence[int]) -> tuple[int, ...]:
    """Read a source assignment off a target assignment (normalizing ``F`` to 0)."""
    bits = np.asarray(b, dtype=np.int64)
    flip = 0
    if cert.ref_var is not None:
        ref_copies = [t for t, o in enumerate(cert.balance_origin) if o == cert.ref_var]
        flip = int(bits[ref_copies[0]])
    return tuple(int(bits[cert.var_map[v][0]]) ^ flip if cert.var_map[v] else 0
                 for v in range(cert.source.num_vars))
