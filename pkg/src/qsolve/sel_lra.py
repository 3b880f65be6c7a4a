"""Selection functions for linear real arithmetic.

Given a model of ``Γ ∪ {¬φ[k̄, ē]}``, a selector returns one term per
universal variable such that the model still satisfies ``¬φ[k̄, t̄]``.  The
terms may mention the virtual symbols δ (a positive infinitesimal) and
``±∞``; :func:`normalize_real` removes them from the resulting instance.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Sequence

from qsolve.arith import (
    DELTA, ExtendedValue, LinearTerm, Literal, Rel, Sort, Var, VirtualTerm,
    infinity, infinity_level, solve_for,
)
from qsolve.errors import NotApplicable, check
from qsolve.formula import (
    TRUE, FALSE, And, Atom, Formula, atom, evaluate, atoms, map_atoms, substitute,
)
from qsolve.ground import Bound, extract_implicant


class LraMode(Enum):
    SIMPLE = "simple"
    LW_DELTA = "lw"
    FR_MID = "fr"
    LW_INF = "lw-inf"
    FR_INF = "fr-inf"

    @property
    def uses_infinity(self) -> bool:
        return self in (LraMode.LW_INF, LraMode.FR_INF)

    @property
    def uses_virtual(self) -> bool:
        return self is not LraMode.FR_MID


class BoundPreference(Enum):
    LOWER = "lower"
    UPPER = "upper"


@dataclass(frozen=True)
class LraSelectorMode:
    mode: LraMode = LraMode.LW_DELTA
    bounds: BoundPreference = BoundPreference.LOWER


@dataclass
class SelectionStep:
    """What the selector did for one variable (used by traces and tests)."""

    var: Var
    lower: tuple[Bound, ...]
    upper: tuple[Bound, ...]
    chosen: Bound | None
    term: LinearTerm


@dataclass
class Selection:
    terms: list[VirtualTerm]
    steps: list[SelectionStep] = field(default_factory=list)
    theta: int = 1


# ---------------------------------------------------------------------------
# normalization of virtual symbols


def eliminate_virtual(lit: Literal) -> Formula:
    """Equivalent δ- and ∞-free formula for one literal.

    ``∞`` dominates every finite term and the highest infinity level
    dominates the lower ones.  A literal ``s + d*δ REL 0`` with ``d != 0``
    is decided by ``s`` unless ``s = 0``, in which case the sign of ``d``
    decides; a negative ``d`` therefore flips strictness.
    """
    term = lit.term
    if not term.has_virtual():
        return Atom(lit)
    rel, neq = lit.effective
    top = None
    for v, c in term.items():
        lvl = infinity_level(v)
        if lvl is not None and (top is None or lvl > top[0]):
            top = (lvl, c)
    if top is not None:
        sign = 1 if top[1] > 0 else -1
        if rel is Rel.EQ:
            return TRUE if neq else FALSE
        return TRUE if rel.holds(sign) else FALSE
    d = term.coeff(DELTA)
    s = term.drop(DELTA)
    if rel is Rel.EQ:
        return TRUE if neq else FALSE
    if rel in (Rel.LT, Rel.LEQ):
        return atom(s, Rel.LEQ if d < 0 else Rel.LT, Sort.REAL)
    return atom(s, Rel.GEQ if d > 0 else Rel.GT, Sort.REAL)


def normalize_real(instance: Formula) -> Formula:
    return map_atoms(instance, eliminate_virtual)


# ---------------------------------------------------------------------------
# the simple fragment


def simple_bounds(neg_phi: Formula, e: Var) -> tuple[list[LinearTerm], list[LinearTerm]]:
    """Lower and upper bounds of a conjunction ``∧ e >= l_i ∧ e <= u_j``.

    Raises :class:`NotApplicable` for any other shape.
    """
    parts = neg_phi.args if isinstance(neg_phi, And) else (neg_phi,)
    lowers, uppers = [], []
    for p in parts:
        if not isinstance(p, Atom) or e not in p.lit.term:
            raise NotApplicable("not a conjunction of bounds on the variable")
        s = solve_for(p.lit, e)
        if s.rel is Rel.GEQ:
            lowers.append(s.rhs)
        elif s.rel is Rel.LEQ:
            uppers.append(s.rhs)
        else:
            raise NotApplicable("strict bound outside the simple fragment")
    return lowers, uppers


def select_simple_lra(model, gamma: Sequence[Formula], neg_phi: Formula, e: Var) -> LinearTerm:
    """Largest lower bound under ``model``, else the smallest upper bound."""
    lowers, uppers = simple_bounds(neg_phi, e)
    if lowers:
        return max(enumerate(lowers), key=lambda it: (it[1].evaluate(model), -it[0]))[1]
    if uppers:
        return min(enumerate(uppers), key=lambda it: (it[1].evaluate(model), it[0]))[1]
    raise NotApplicable("no bounds")


# ---------------------------------------------------------------------------
# the general selector


def _ext(t: LinearTerm, model) -> ExtendedValue:
    return t.evaluate_ext(model)


def _offset(b: Bound, direction: int) -> LinearTerm:
    """Bound term plus (lower) or minus (upper) δ when the bound is strict."""
    t = b.solved.rhs
    return t + LinearTerm.of(DELTA) * direction if b.strict else t


def _best(bounds: Sequence[Bound], model, lower: bool, with_delta: bool) -> Bound:
    def key(b: Bound):
        t = _offset(b, 1 if lower else -1) if with_delta else b.solved.rhs
        return _ext(t, model)
    best = bounds[0]
    best_v = key(best)
    for b in bounds[1:]:
        v = key(b)
        if (v > best_v) if lower else (v < best_v):
            best, best_v = b, v
    return best


def choose_term(mode: LraSelectorMode, level: int, lower: Sequence[Bound], upper: Sequence[Bound],
                model) -> tuple[LinearTerm, Bound | None]:
    """The return value of one selection step for a single variable."""
    m = mode.mode
    prefer_lower = mode.bounds is BoundPreference.LOWER
    inf = LinearTerm.of(infinity(level))
    if m in (LraMode.LW_DELTA, LraMode.SIMPLE):
        order = ((lower, True), (upper, False)) if prefer_lower else ((upper, False), (lower, True))
        for bounds, is_lower in order:
            if bounds:
                b = _best(bounds, model, is_lower, True)
                return _offset(b, 1 if is_lower else -1), b
        return LinearTerm(), None
    if m is LraMode.LW_INF:
        if prefer_lower:
            if lower:
                b = _best(lower, model, True, True)
                return _offset(b, 1), b
            return -inf, None
        if upper:
            b = _best(upper, model, False, True)
            return _offset(b, -1), b
        return inf, None
    if m is LraMode.FR_MID:
        lo = _best(lower, model, True, False) if lower else None
        up = _best(upper, model, False, False) if upper else None
        if lo and up:
            return (lo.solved.rhs + up.solved.rhs) / 2, (lo if prefer_lower else up)
        if lo:
            return lo.solved.rhs + 1, lo
        if up:
            return up.solved.rhs - 1, up
        return LinearTerm(), None
    # FR_INF
    lo = _best(lower, model, True, False) if lower else None
    up = _best(upper, model, False, False) if upper else None
    if lo and up:
        return (lo.solved.rhs + up.solved.rhs) / 2, (lo if prefer_lower else up)
    if lo:
        return inf, None
    if up:
        return -inf, None
    return (-inf if prefer_lower else inf), None


def candidate_terms(mode: LraSelectorMode, psi: Formula, e: Var, level: int) -> set[LinearTerm]:
    """Every term the selector may return for ``e`` given the atoms of ``psi``.

    Built from the atoms directly (not from an implicant), this is the
    finite set that bounds the number of distinct selections.
    """
    sols = []
    for a in atoms(psi):
        if e in a.term:
            sols.append(solve_for(Literal(a.term, Rel.LEQ), e).rhs)
    d = LinearTerm.of(DELTA)
    inf = LinearTerm.of(infinity(level))
    m = mode.mode
    out: set[LinearTerm] = set()
    if m in (LraMode.LW_DELTA, LraMode.SIMPLE, LraMode.LW_INF):
        for t in sols:
            out.update((t, t + d, t - d))
        out.add(LinearTerm() if m is not LraMode.LW_INF else inf)
        if m is LraMode.LW_INF:
            out.add(-inf)
    else:
        for i, t in enumerate(sols):
            for u in sols[i:]:
                out.add((t + u) / 2)
        if m is LraMode.FR_MID:
            for t in sols:
                out.update((t + 1, t - 1))
            out.add(LinearTerm())
        else:
            out.update((inf, -inf))
    return out


def select_lra(model, gamma: Sequence[Formula], neg_phi: Formula, e_vars: Sequence[Var],
               mode: LraSelectorMode = LraSelectorMode(), check_invariants: bool = True,
               minimize: bool = False) -> Selection:
    """Terms for ``e_vars``: one recursion step per variable, in order.

    After choosing ``t_i`` the substitution ``e_i -> t_i`` is applied to
    the remaining formula and to the earlier terms before the next
    variable is handled.
    """
    if mode.mode is LraMode.SIMPLE and len(e_vars) == 1:
        try:
            t = select_simple_lra(model, gamma, neg_phi, e_vars[0])
            if check_invariants:
                check(evaluate(substitute(neg_phi, {e_vars[0]: t}), model),
                      "simple selector is not model-preserving")
            return Selection([VirtualTerm(t)])
        except NotApplicable:
            pass
    psi = neg_phi
    terms: list[LinearTerm] = []
    steps: list[SelectionStep] = []
    for level, e in enumerate(e_vars):
        imp = extract_implicant(model, psi, e, minimize)
        t, chosen = choose_term(mode, level, imp.lower, imp.upper, model)
        if check_invariants:
            check(t in candidate_terms(mode, psi, e, level),
                  f"selected term {t} for {e.name} outside the finite candidate set")
        steps.append(SelectionStep(e, imp.lower, imp.upper, chosen, t))
        sigma = {e: t}
        psi = substitute(psi, sigma)
        terms = [s.subst(sigma) for s in terms] + [t]
        if check_invariants:
            check(evaluate(psi, model), f"model lost after substituting for {e.name}")
    if check_invariants:
        final = substitute(neg_phi, dict(zip(e_vars, terms)))
        check(evaluate(final, model), "selection is not model-preserving")
    return Selection([VirtualTerm(t) for t in terms], steps)
