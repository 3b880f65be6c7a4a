import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from qsolve.arith import DELTA, LinearTerm, Literal, Rel, Sort, Var, infinity
from qsolve.errors import NotApplicable
from qsolve.formula import (
    FALSE, TRUE, atom, conj, eliminate_equalities, evaluate, negate, substitute, to_nnf,
)
from qsolve.ground import GroundSolver, Model
from qsolve.sel_lra import (
    BoundPreference, LraMode, LraSelectorMode, candidate_terms, eliminate_virtual,
    normalize_real, select_lra, select_simple_lra,
)

from formula_gen import random_one_alternation

R = Sort.REAL
a, b = Var("a", R), Var("b", R)
e, e1, e2 = Var("e", R), Var("e1", R), Var("e2", R)
A, B, D = LinearTerm.of(a), LinearTerm.of(b), LinearTerm.of(DELTA)
E, E1, E2 = LinearTerm.of(e), LinearTerm.of(e1), LinearTerm.of(e2)


def model(**kw):
    names = {"a": a, "b": b, "e": e, "e1": e1, "e2": e2}
    return Model({names[k]: Fraction(v) for k, v in kw.items()})


def terms(sel):
    return [t.term for t in sel.terms]


def test_simple_picks_largest_lower_bound():
    # not (x < b or x > a)  is  e >= b and e <= a
    neg = conj([atom(E - B, Rel.GEQ), atom(E - A, Rel.LEQ)])
    assert select_simple_lra(model(a=3, b=1, e=2), [], neg, e) == B


def test_simple_then_other_bound():
    neg = conj([atom(E - A, Rel.GEQ), atom(E - B, Rel.GEQ)])
    assert select_simple_lra(model(a=2, b=1, e=5), [], neg, e) == A
    assert select_simple_lra(model(a=1, b=2, e=5), [], neg, e) == B


def test_simple_only_upper_bound():
    assert select_simple_lra(model(a=1, e=0), [], atom(E - A, Rel.LEQ), e) == A


def test_simple_rejects_strict_bounds():
    with pytest.raises(NotApplicable):
        select_simple_lra(model(a=0, e=1), [], atom(E - A, Rel.GT), e)


def test_strict_lower_bound_gets_delta():
    # not (x <= a or x <= b) under a maximal
    neg = conj([atom(E - A, Rel.GT), atom(E - B, Rel.GT)])
    sel = select_lra(model(a=1, b=0, e=2), [], neg, [e])
    assert terms(sel) == [A + D]
    inst = normalize_real(substitute(negate(neg), {e: A + D}))
    assert inst == atom(A - B, Rel.LT)


def test_two_variables_midpoint_tuple():
    neg = conj([atom(E1 + E2 - A, Rel.GEQ), atom(E1 - E2 - B, Rel.GEQ)])
    sel = select_lra(model(a=0, b=0, e1=0, e2=0), [], neg, [e1, e2])
    assert terms(sel) == [(A + B) / 2, (A - B) / 2]
    inst = substitute(negate(neg), dict(zip([e1, e2], terms(sel))))
    assert normalize_real(inst) == FALSE


def test_unbounded_second_variable_is_zero():
    # not (forall x y. x <= y)
    neg = atom(E1 - E2, Rel.GT)
    sel = select_lra(model(e1=1, e2=0), [], neg, [e1, e2])
    assert terms(sel) == [D, LinearTerm()]
    assert normalize_real(substitute(negate(neg), {e1: D, e2: LinearTerm()})) == FALSE


def test_delta_scaled_by_substitution():
    # not (forall x y. x <= 0 or y - 2x <= 0)
    neg = conj([atom(E1, Rel.GT), atom(E2 - E1 * 2, Rel.GT)])
    sel = select_lra(model(e1=1, e2=3), [], neg, [e1, e2])
    assert terms(sel) == [D, D * 3]
    assert normalize_real(substitute(negate(neg), {e1: D, e2: D * 3})) == FALSE


@pytest.mark.parametrize("mode, expected", [
    (LraMode.FR_MID, [(A + B) / 2 + Fraction(3, 2), (A - B) / 2 - Fraction(1, 2)]),
    (LraMode.FR_INF, [LinearTerm.of(infinity(0)), (A - B) / 2]),
])
def test_midpoint_modes(mode, expected):
    neg = conj([atom(E1 + E2 - A, Rel.GEQ), atom(E1 - E2 - B, Rel.GEQ)])
    sel = select_lra(model(a=0, b=0, e1=0, e2=0), [], neg, [e1, e2], LraSelectorMode(mode))
    assert terms(sel) == expected


def test_midpoint_between_bounds():
    neg = conj([atom(E - A, Rel.GT), atom(E - B, Rel.LT)])
    sel = select_lra(model(a=0, b=2, e=1), [], neg, [e], LraSelectorMode(LraMode.FR_MID))
    assert terms(sel) == [(A + B) / 2]


def test_upper_preference():
    neg = conj([atom(E - A, Rel.GT), atom(E - B, Rel.LT)])
    mode = LraSelectorMode(LraMode.LW_DELTA, BoundPreference.UPPER)
    assert terms(select_lra(model(a=0, b=2, e=1), [], neg, [e], mode)) == [B - D]


@pytest.mark.parametrize("lit, expected", [
    (Literal(A + D - A, Rel.LEQ), FALSE),
    (Literal(A + D - B, Rel.LEQ), atom(A - B, Rel.LT)),
    (Literal(A - D - B, Rel.LT), atom(A - B, Rel.LEQ)),
    (Literal(A - LinearTerm.of(infinity(0)), Rel.LT), TRUE),
    (Literal(LinearTerm.of(infinity(0)) - A, Rel.LT), FALSE),
    (Literal(LinearTerm.of(infinity(1)) - LinearTerm.of(infinity(0)) * 5, Rel.LEQ), FALSE),
])
def test_eliminate_virtual(lit, expected):
    assert eliminate_virtual(lit) == expected


def test_virtual_free_literal_unchanged():
    lit = Literal(A - B, Rel.LT)
    assert eliminate_virtual(lit) == atom(A - B, Rel.LT)


@pytest.mark.parametrize("mode", list(LraMode))
@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**9))
def test_selection_invariants_on_random_bodies(mode, seed):
    """Model preservation and candidate membership hold for every mode."""
    rng = random.Random(seed)
    phi = random_one_alternation(rng, R, n_const=2)
    xs = list(phi.vars) if hasattr(phi, "vars") else []
    if not xs:
        return
    body = phi.body
    es = [Var(f"s{i}", R) for i in range(len(xs))]
    inner = substitute(body, {x: LinearTerm.of(s) for x, s in zip(xs, es)})
    neg = eliminate_equalities(to_nnf(negate(inner)))
    r = GroundSolver().check([neg])
    if not r.is_sat:
        return
    m = r.model
    sel_mode = LraSelectorMode(mode, rng.choice(list(BoundPreference)))
    # select_lra asserts the invariants itself; a violation raises
    sel = select_lra(m, [], neg, es, sel_mode)
    assert len(sel.terms) == len(es)
    psi = neg
    for level, (s, step) in enumerate(zip(es, sel.steps)):
        assert step.term in candidate_terms(sel_mode, psi, s, level)
        psi = substitute(psi, {s: step.term})
    final = substitute(neg, dict(zip(es, terms(sel))))
    assert evaluate(final, m)
