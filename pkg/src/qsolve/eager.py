"""Eager instantiation oracle.

Instead of asking a selector for one term tuple per iteration, enumerate
every tuple a selector could ever return (the finite candidate closure)
and decide ``∃k̄ ∧_{t̄} φ[k̄, t̄]``.  The conjunction is not asserted all at
once: a model of the current instances is checked against every remaining
instance by evaluation and the violated ones are added until none is
left.  The verdict is the same as asserting the whole closure.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

from qsolve.arith import Kind, LinearTerm, Sort, Substitution, Var, VirtualTerm
from qsolve.errors import ResourceLimit, UnsupportedFeature
from qsolve.formula import (
    Formula, FreshNames, apply_subst, eliminate_equalities, evaluate,
    is_quantifier_free, negate, substitute, to_nnf,
)
from qsolve.ground import GroundSolver
from qsolve.sel_lia import atom_bounds, canonical_key, normalize_int_div
from qsolve.sel_lra import LraMode, LraSelectorMode, candidate_terms, normalize_real


@dataclass(frozen=True)
class Candidate:
    terms: tuple[VirtualTerm, ...]
    key: object


@dataclass
class EagerResult:
    sat: bool
    closure_size: int
    used: int
    wall_time: float = 0.0
    instances: list[Formula] = field(default_factory=list)


def lra_closure(psi: Formula, es: Sequence[Var], mode: LraMode = LraMode.LW_DELTA,
                limit: int = 50_000) -> list[tuple[LinearTerm, ...]]:
    """All term tuples the real selector in ``mode`` can produce for ``psi``."""
    sel_mode = LraSelectorMode(mode)
    out: list[tuple[LinearTerm, ...]] = []

    def walk(f: Formula, level: int, acc: tuple[LinearTerm, ...]):
        if level == len(es):
            out.append(acc)
            if len(out) > limit:
                raise ResourceLimit("candidate closure too large")
            return
        e = es[level]
        for t in sorted(candidate_terms(sel_mode, f, e, level), key=str):
            sigma = {e: t}
            walk(substitute(f, sigma), level + 1, tuple(s.subst(sigma) for s in acc) + (t,))

    walk(psi, 0, ())
    return out


def lia_closure(psi: Formula, es: Sequence[Var], limit: int = 50_000) -> list[Candidate]:
    """All ``(T̄, θ, p̄)`` the integer selector can produce, deduplicated by instance.

    θ is never reduced here, so the ranges of ρ are the largest possible;
    reduced selections denote the same values and share a key.
    """
    seen: dict[object, Candidate] = {}
    count = [0]

    def walk(f: Formula, level: int, theta: int, acc: tuple[LinearTerm, ...], pols: tuple[int, ...]):
        if level == len(es):
            terms = tuple(VirtualTerm(s, theta, p) for s, p in zip(acc, pols))
            key = canonical_key(terms)
            seen.setdefault(key, Candidate(terms, key))
            return
        count[0] += 1
        if count[0] > limit:
            raise ResourceLimit("candidate closure too large")
        e = es[level]
        lows, ups = atom_bounds(f, e)
        picks = set()
        for b in lows:
            for rho in range(theta * b.coeff):
                picks.add((b.coeff, b.value + rho, 1))
        for b in ups:
            for rho in range(theta * b.coeff):
                picks.add((b.coeff, b.value - rho, -1))
        for rho in range(theta):
            picks.add((1, LinearTerm.constant(rho), 1))
        for c, t, p in sorted(picks, key=str):
            sigma = Substitution.single(e, t, c)
            walk(apply_subst(f, sigma), level + 1, theta * c,
                 tuple(sigma.apply_term(s) for s in acc) + (t * theta,), pols + (p,))

    walk(psi, 0, 1, (), ())
    return list(seen.values())


def _split(phi: Formula) -> tuple[tuple[Var, ...], Formula]:
    from qsolve.cegqi import split_prenex
    return split_prenex(phi)


def closure(phi: Formula, names: FreshNames | None = None, limit: int = 50_000,
            mode: LraMode = LraMode.LW_DELTA) -> tuple[tuple[Var, ...], Formula, list[Candidate]]:
    """``(x̄, body, candidates)`` for a one-alternation formula."""
    names = names or FreshNames()
    xs, body = _split(phi)
    if not xs:
        return xs, body, []
    sorts = {x.sort for x in xs}
    if len(sorts) != 1 or Sort.BOOL in sorts:
        raise UnsupportedFeature("eager oracle needs a prefix of one arithmetic sort")
    es = [names.fresh("e", x.sort, Kind.SKOLEM_E) for x in xs]
    inner = substitute(body, {x: LinearTerm.of(e) for x, e in zip(xs, es)})
    psi = eliminate_equalities(negate(inner))
    if sorts == {Sort.INT}:
        return xs, body, lia_closure(psi, es, limit)
    out = []
    for tup in lra_closure(psi, es, mode, limit):
        out.append(Candidate(tuple(VirtualTerm(t) for t in tup), None))
    return xs, body, out


def closure_size(phi: Formula, limit: int = 50_000, mode: LraMode = LraMode.LW_DELTA) -> int:
    """Number of distinct instances in the candidate closure (``mode`` matters for reals)."""
    xs, body, cands = closure(phi, limit=limit, mode=mode)
    if not xs:
        return 0
    return len({_instance_key(xs, body, c) for c in cands})


def _instance_key(xs, body, c: Candidate):
    if c.key is not None:
        return c.key
    return normalize_real(substitute(body, {x: t.term for x, t in zip(xs, c.terms)}))


def _holds(xs, body: Formula, c: Candidate, model) -> bool:
    """Truth of ``body[x̄ := t̄]`` in ``model``, computed from the term values."""
    if xs[0].sort is Sort.INT:
        values = {x: LinearTerm.constant(t.evaluate(model)) for x, t in zip(xs, c.terms)}
        return evaluate(substitute(body, values), model)
    inst = normalize_real(substitute(body, {x: t.term for x, t in zip(xs, c.terms)}))
    return evaluate(inst, model)


def eager_solve(phi: Formula, ground: Sequence[Formula] = (), solver: GroundSolver | None = None,
                limit: int = 50_000, max_rounds: int = 10_000, per_round: int = 8) -> EagerResult:
    """Decide ``∃k̄ ∀x̄ φ`` (with extra ground assertions) from the full closure."""
    start = time.perf_counter()
    solver = solver or GroundSolver()
    names = FreshNames()
    xs, body, cands = closure(phi, names, limit)
    gamma = [eliminate_equalities(to_nnf(g)) for g in ground]
    if not xs:
        r = solver.check(gamma + [body])
        return EagerResult(r.is_sat, 0, 0, time.perf_counter() - start)
    # keep one candidate per distinct instance
    unique: dict[object, Candidate] = {}
    for c in cands:
        unique.setdefault(_instance_key(xs, body, c), c)
    pending = list(unique.values())
    instances: list[Formula] = []
    for _ in range(max_rounds):
        r = solver.check(gamma + instances)
        if not r.is_sat:
            return EagerResult(False, len(unique), len(instances), time.perf_counter() - start, instances)
        violated = []
        for c in pending:
            if not _holds(xs, body, c, r.model):
                violated.append(c)
                if len(violated) >= per_round:
                    break
        if not violated:
            return EagerResult(True, len(unique), len(instances), time.perf_counter() - start, instances)
        gone = {id(c) for c in violated}
        pending = [c for c in pending if id(c) not in gone]
        for c in violated:
            instances.append(_materialize(xs, body, c, names))
    raise ResourceLimit("eager refinement did not converge")


def _materialize(xs, body: Formula, c: Candidate, names: FreshNames) -> Formula:
    if xs[0].sort is Sort.INT:
        inst, _ = normalize_int_div(body, xs, c.terms, names)
        return eliminate_equalities(to_nnf(inst))
    return eliminate_equalities(to_nnf(
        normalize_real(substitute(body, {x: t.term for x, t in zip(xs, c.terms)}))))


def eager_verdict(assertions: Sequence[Formula], limit: int = 50_000) -> bool | None:
    """Closure verdict for one-alternation inputs; None when the oracle does not apply."""
    quantified = [a for a in assertions if not is_quantifier_free(a)]
    ground = [a for a in assertions if is_quantifier_free(a)]
    if len(quantified) > 1:
        return None
    phi = quantified[0] if quantified else ground.pop() if ground else None
    if phi is None:
        return True
    try:
        return eager_solve(phi, ground, limit=limit).sat
    except (UnsupportedFeature, ResourceLimit):
        return None
