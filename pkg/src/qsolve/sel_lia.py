"""Selection function for linear integer arithmetic.

Each step picks a bound ``c*e >= l`` (or ``d*e <= u``) from an implicant,
shifts it by ``rho`` so that the chosen term is congruent to ``c*e`` in the
current model, and substitutes ``c*e -> t`` into the remaining formula.
``theta`` collects the coefficients; the final terms denote
``T_j div^p theta`` (ceiling for ``+``, floor for ``-``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from qsolve.arith import (
    Kind, LinearTerm, Literal, Rel, Sort, Substitution, Var, VirtualTerm, congruent,
    divides, rat_mod, solve_for,
)
from qsolve.errors import check
from qsolve.formula import (
    Formula, FreshNames, apply_subst, atom, atoms, conj, eliminate_equalities, evaluate,
    substitute,
)
from qsolve.ground import Bound, extract_implicant
from qsolve.sel_lra import BoundPreference


@dataclass(frozen=True)
class IntBound:
    """``coeff * e >= value`` (lower) or ``coeff * e <= value`` (upper)."""

    index: int
    coeff: int
    value: LinearTerm


def int_bound(b: Bound, lower: bool) -> IntBound:
    s = b.solved
    rhs = s.rhs
    if lower and s.rel is Rel.GT:
        rhs = rhs + 1
    elif not lower and s.rel is Rel.LT:
        rhs = rhs - 1
    return IntBound(b.index, int(s.coeff), rhs)


@dataclass
class LiaStep:
    var: Var
    lower: tuple[IntBound, ...]
    upper: tuple[IntBound, ...]
    coeff: int
    term: LinearTerm
    polarity: int
    rho: int
    theta: int             # θ before this step


@dataclass
class LiaSelection:
    terms: list[VirtualTerm]
    theta: int
    steps: list[LiaStep] = field(default_factory=list)


def _ival(t: LinearTerm, model) -> int:
    v = t.evaluate(model)
    check(v.denominator == 1, f"non-integral value for {t}")
    return int(v)


def choose_bound(lower: Sequence[IntBound], upper: Sequence[IntBound], e: Var, theta: int,
                 model, prefer: BoundPreference = BoundPreference.LOWER) -> tuple[int, LinearTerm, int, int]:
    """One selection step: returns ``(c, t, polarity, rho)``."""
    ev = _ival(LinearTerm.of(e), model)
    use_lower = bool(lower) and (prefer is BoundPreference.LOWER or not upper)
    if use_lower:
        best = lower[0]
        for b in lower[1:]:
            if Fraction(_ival(b.value, model), b.coeff) > Fraction(_ival(best.value, model), best.coeff):
                best = b
        rho = rat_mod(best.coeff * ev - _ival(best.value, model), theta * best.coeff)
        return best.coeff, best.value + rho, 1, rho
    if upper:
        best = upper[0]
        for b in upper[1:]:
            if Fraction(_ival(b.value, model), b.coeff) < Fraction(_ival(best.value, model), best.coeff):
                best = b
        rho = rat_mod(_ival(best.value, model) - best.coeff * ev, theta * best.coeff)
        return best.coeff, best.value - rho, -1, rho
    rho = rat_mod(ev, theta)
    return 1, LinearTerm.constant(rho), 1, rho


def atom_bounds(psi: Formula, e: Var) -> tuple[list[IntBound], list[IntBound]]:
    """Both bound readings of every atom of ``psi`` mentioning ``e``."""
    lows, ups = [], []
    for i, a in enumerate(atoms(psi)):
        if e not in a.term:
            continue
        s = solve_for(a, e)
        c = int(s.coeff)
        if s.rel is Rel.EQ:
            lows.append(IntBound(i, c, s.rhs))
            ups.append(IntBound(i, c, s.rhs))
        elif s.rel is Rel.LEQ:          # c*e <= r, negation c*e >= r + 1
            ups.append(IntBound(i, c, s.rhs))
            lows.append(IntBound(i, c, s.rhs + 1))
        else:                           # c*e >= r (from a flipped LEQ)
            lows.append(IntBound(i, c, s.rhs))
            ups.append(IntBound(i, c, s.rhs - 1))
    return lows, ups


def in_candidate_set(psi: Formula, e: Var, theta: int, c: int, t: LinearTerm) -> bool:
    """Whether ``(c, t)`` belongs to the finite per-variable candidate set.

    Candidates are ``(c_i, l_i + rho)`` and ``(d_j, u_j - rho)`` for the
    bounds readable off the atoms of ``psi``, plus ``(1, rho)``, with
    ``0 <= rho < theta * c``.
    """
    lows, ups = atom_bounds(psi, e)
    for b in lows:
        diff = t - b.value
        if b.coeff == c and diff.is_constant() and 0 <= diff.const < theta * c:
            return True
    for b in ups:
        diff = b.value - t
        if b.coeff == c and diff.is_constant() and 0 <= diff.const < theta * c:
            return True
    return c == 1 and t.is_constant() and 0 <= t.const < theta


def reduce_theta(theta: int, terms: Sequence[LinearTerm]) -> tuple[int, list[LinearTerm]]:
    """Divide ``theta`` and all accumulated terms by their common divisor.

    Sound because the terms stand for the rational values ``T_j / theta``
    until the final rounding, which is unchanged by the common factor.
    """
    g = theta
    for t in terms:
        g = math.gcd(g, t.content())
    if g <= 1:
        return theta, list(terms)
    return theta // g, [t / g for t in terms]


def select_lia(model, gamma: Sequence[Formula], neg_phi: Formula, e_vars: Sequence[Var],
               prefer: BoundPreference = BoundPreference.LOWER, check_invariants: bool = True,
               reduce: bool = True, minimize: bool = False) -> LiaSelection:
    """Terms ``T_j div^p_j theta`` for ``e_vars``.

    With ``reduce`` set, common factors of ``theta`` and the accumulated
    terms are divided out between steps (never after the last one, so the
    returned tuple is the one the recursion builds).
    """
    psi = neg_phi
    theta = 1
    acc: list[LinearTerm] = []
    pols: list[int] = []
    steps: list[LiaStep] = []
    for i, e in enumerate(e_vars):
        imp = extract_implicant(model, psi, e, minimize)
        lower = tuple(int_bound(b, True) for b in imp.lower)
        upper = tuple(int_bound(b, False) for b in imp.upper)
        c, t, p, rho = choose_bound(lower, upper, e, theta, model, prefer)
        if check_invariants:
            check(congruent(_ival(LinearTerm.of(e), model) * c, _ival(t, model), theta * c),
                  f"selected term {t} not congruent to {c}*{e.name}")
            check(in_candidate_set(psi, e, theta, c, t),
                  f"selected ({c}, {t}) for {e.name} outside the finite candidate set")
        steps.append(LiaStep(e, lower, upper, c, t, p, rho, theta))
        sigma = Substitution.single(e, t, c)
        psi = apply_subst(psi, sigma)
        acc = [sigma.apply_term(s) for s in acc] + [t * theta]
        pols.append(p)
        theta *= c
        if check_invariants:
            check(evaluate(psi, model), f"model lost after substituting for {e.name}")
            for s in acc:
                check(divides(theta, _ival(s, model)), f"theta={theta} does not divide {s}")
        if reduce and i + 1 < len(e_vars):
            theta, acc = reduce_theta(theta, acc)
    terms = [VirtualTerm(s, theta, p) for s, p in zip(acc, pols)]
    if check_invariants:
        values = {e: vt.evaluate(model) for e, vt in zip(e_vars, terms)}
        final = substitute(neg_phi, {e: LinearTerm.constant(v) for e, v in values.items()})
        check(evaluate(final, model), "selection is not model-preserving")
    return LiaSelection(terms, theta, steps)


# ---------------------------------------------------------------------------
# eliminating integer division


def exact_term(vt: VirtualTerm) -> LinearTerm | None:
    """``T / theta`` when the division is exact for every valuation."""
    if vt.div_by == 1:
        return vt.term
    t = vt.term
    if t.is_integral() and t.content() % vt.div_by == 0:
        return t / vt.div_by
    return None


def normalize_int_div(body: Formula, bound_vars: Sequence[Var], terms: Sequence[VirtualTerm],
                      names: FreshNames) -> tuple[Formula, list[Var]]:
    """``body[x̄ := t̄]`` with ``div`` replaced by fresh ``d``/``m`` constants.

    For ``T div^p theta`` the side constraints are ``theta*d = T + m`` (p = +)
    or ``theta*d = T - m`` (p = -) with ``0 <= m < theta``.  Returns the
    formula and the fresh constants it introduced.
    """
    mapping: dict[Var, LinearTerm] = {}
    side: list[Formula] = []
    fresh: list[Var] = []
    for x, vt in zip(bound_vars, terms):
        t = exact_term(vt)
        if t is not None:
            mapping[x] = t
            continue
        d = names.fresh("d", Sort.INT, Kind.FRESH_D)
        m = names.fresh("m", Sort.INT, Kind.FRESH_M)
        fresh += [d, m]
        mapping[x] = LinearTerm.of(d)
        dm = LinearTerm.of(d) * vt.div_by
        rhs = vt.term + LinearTerm.of(m) * vt.polarity
        side.append(atom(dm - rhs, Rel.EQ, Sort.INT))
        side.append(atom(LinearTerm.of(m), Rel.GEQ, Sort.INT))
        side.append(atom(LinearTerm.of(m) - vt.div_by, Rel.LT, Sort.INT))
    return eliminate_equalities(conj([substitute(body, mapping)] + side)), fresh


def canonical_key(terms: Sequence[VirtualTerm]) -> tuple:
    """Hashable key identifying the instance a tuple of terms produces."""
    out = []
    for vt in terms:
        t = exact_term(vt)
        if t is not None:
            out.append((t, 1, 1))
            continue
        g = math.gcd(vt.div_by, vt.term.content()) if vt.term.is_integral() else 1
        out.append((vt.term / g, vt.div_by // g, vt.polarity))
    return tuple(out)
