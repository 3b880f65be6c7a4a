import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from qsolve.arith import (
    DELTA, ExtendedValue, Kind, LinearTerm, Literal, Rel, Sort, Substitution, Var, VirtualTerm,
    divides, extended_compare, infinity, make_literal, rat_arith, rat_mod, solve_for,
)
from qsolve.errors import NotApplicable
from qsolve.formula import apply_subst, atom, evaluate

a, b = Var("a", Sort.REAL), Var("b", Sort.REAL)
e1, e2 = Var("e1", Sort.INT), Var("e2", Sort.INT)
ia, ib = Var("a", Sort.INT), Var("b", Sort.INT)
x = Var("x", Sort.REAL)


def L(*pairs, c=0):
    return LinearTerm(dict(pairs), c)


# -- exact rationals


def test_addition_is_exact():
    assert rat_arith(Fraction(1, 2), Fraction(1, 3), "+") == Fraction(5, 6)


@pytest.mark.parametrize("x_, m, expected", [(7, 3, 1), (-1, 3, 2), (-6, 3, 0), (5, -3, 2)])
def test_mod_is_nonnegative(x_, m, expected):
    assert rat_mod(x_, m) == expected


def test_divides():
    assert divides(3, 12)
    assert not divides(3, 11)


def test_division_by_zero():
    with pytest.raises(ZeroDivisionError):
        rat_arith(1, 0, "/")
    with pytest.raises(ZeroDivisionError):
        rat_mod(1, 0)


def test_mod_on_fraction_is_an_error():
    with pytest.raises(Exception):
        rat_mod(Fraction(1, 2), 3)


@given(st.integers(-10**30, 10**30), st.integers(1, 10**12))
def test_mod_range_and_congruence(n, m):
    r = rat_mod(n, m)
    assert 0 <= r < m
    assert (n - r) % m == 0


# -- linear terms and literals


def test_terms_have_no_zero_entries():
    t = L((a, 1), (b, 2)) - L((b, 2))
    assert t.vars == (a,)
    assert t == LinearTerm.of(a)


@pytest.mark.parametrize("term, rel", [
    (L((a, 2), (b, -4), c=6), Rel.LT),
    (L((a, -3), c=1), Rel.GEQ),
    (L((b, Fraction(1, 2)), (a, 5)), Rel.EQ),
])
def test_real_canonical_form(term, rel):
    lit = make_literal(term, rel, Sort.REAL)
    lead = lit.term.leading()
    assert lead[1] == 1
    assert make_literal(lit.term, lit.rel, Sort.REAL) == Literal(lit.term, lit.rel, False)


def test_integer_canonical_form_has_gcd_one():
    lit = make_literal(L((ia, 4), (ib, -6), c=3), Rel.LT, Sort.INT)
    assert lit.term.var_content() == 1


coeff = st.integers(-4, 4)


@st.composite
def int_literals(draw):
    t = LinearTerm(dict([(ia, draw(coeff)), (ib, draw(coeff))]), draw(st.integers(-6, 6)))
    return t, draw(st.sampled_from(list(Rel)))


@given(int_literals())
def test_canonicalization_idempotent_and_equivalent(data):
    t, rel = data
    lit = make_literal(t, rel, Sort.INT)
    if isinstance(lit, bool):
        return
    again = make_literal(lit.term, lit.rel, Sort.INT)
    again = again.negate() if lit.negated else again
    assert again == lit
    for pa, pb in itertools.product(range(-4, 5), repeat=2):
        env = {ia: pa, ib: pb}
        s = t.evaluate(env)
        assert lit.holds(env) == rel.holds((s > 0) - (s < 0))


# -- solved forms


def test_solve_for_scales_reals():
    s = solve_for(make_literal(L((x, 2), (a, -1)), Rel.GEQ, Sort.REAL), x)
    assert s.coeff == 1 and s.rel is Rel.GEQ and s.rhs == LinearTerm.of(a) / 2


def test_solve_for_keeps_integer_coefficient():
    # e1 + 3*e2 >= b, solved for e2
    lit = make_literal(L((e1, 1), (e2, 3), (ib, -1)), Rel.GEQ, Sort.INT)
    s = solve_for(lit, e2)
    assert s.coeff == 3 and s.is_lower
    assert s.rhs == L((ib, 1), (e1, -1))


def test_solve_for_strict_simple():
    s = solve_for(make_literal(L((x, 1), c=-5), Rel.LT, Sort.REAL), x)
    assert s.rel is Rel.LT and s.rhs == LinearTerm.constant(5)


def test_solve_for_absent_variable():
    with pytest.raises(NotApplicable):
        solve_for(make_literal(L((a, 1)), Rel.LT, Sort.REAL), x)


@given(int_literals())
def test_solve_for_round_trip(data):
    t, rel = data
    lit = make_literal(t, rel, Sort.INT)
    if isinstance(lit, bool) or ib not in lit.term or lit.effective[1]:
        return
    s = solve_for(lit, ib)
    for pa, pb in itertools.product(range(-5, 6), repeat=2):
        env = {ia: pa, ib: pb}
        lhs = s.coeff * pb
        rhs = s.rhs.evaluate(env)
        d = lhs - rhs
        assert lit.holds(env) == s.rel.holds((d > 0) - (d < 0))


# -- substitutions


def test_substitution_with_coefficient():
    # {2*e1 -> a} applied to e1 + 3*e2 >= b gives 6*e2 >= 2*b - a
    f = atom(L((e1, 1), (e2, 3), (ib, -1)), Rel.GEQ, Sort.INT)
    g = apply_subst(f, Substitution.single(e1, LinearTerm.of(ia), 2))
    expected = atom(L((e2, 6), (ib, -2), (ia, 1)), Rel.GEQ, Sort.INT)
    assert g == expected


def test_real_substitution_with_delta():
    from qsolve.sel_lra import normalize_real
    from qsolve.formula import disj, substitute
    e = Var("e", Sort.REAL)
    f = disj([atom(L((e, 1), (a, -1)), Rel.LEQ), atom(L((e, 1), (b, -1)), Rel.LEQ)])
    g = normalize_real(substitute(f, {e: L((a, 1), (DELTA, 1))}))
    assert g == atom(L((a, 1), (b, -1)), Rel.LT)


def test_empty_substitution_is_identity():
    t = L((ia, 3), c=2)
    assert Substitution().apply_term(t) == t


def test_real_substitution_rejects_coefficients():
    with pytest.raises(ValueError):
        Substitution.single(x, LinearTerm.of(a), 2)


@given(st.integers(1, 4), st.integers(-3, 3), st.integers(-3, 3), st.integers(-5, 5),
       st.integers(-6, 6), st.sampled_from([Rel.LEQ, Rel.LT, Rel.EQ]))
def test_integer_substitution_preserves_truth(c, p, q, k, av, rel):
    # literal p*e1 + q*a + k REL 0, substitution {c*e1 -> t} with c | t
    lit = atom(L((e1, p), (ia, q), c=k), rel, Sort.INT)
    t = L((ia, c))            # value of e1 is a
    g = apply_subst(lit, Substitution.single(e1, t, c))
    env = {ia: av, e1: av}
    assert evaluate(lit, env) == evaluate(g, env)


# -- extended values


def test_extended_compare_examples():
    assert extended_compare(ExtendedValue(5, 1), ExtendedValue(5, 0)) == 1
    assert extended_compare(ExtendedValue(3, 9), ExtendedValue(4, 0)) == -1
    assert extended_compare(ExtendedValue(0, 0, (1,)), ExtendedValue(10**9)) == 1


def test_higher_infinity_dominates():
    lo = LinearTerm.of(infinity(0)) * 1000
    hi = LinearTerm.of(infinity(1))
    assert (hi - lo).evaluate_ext({}).sign() == 1


ext = st.builds(ExtendedValue, st.fractions(max_denominator=5), st.integers(-2, 2),
                st.lists(st.integers(-1, 1), max_size=2).map(tuple))


@settings(max_examples=200)
@given(ext, ext, ext)
def test_extended_order_is_total(u, v, w):
    assert extended_compare(u, v) == -extended_compare(v, u)
    if extended_compare(u, v) <= 0 and extended_compare(v, w) <= 0:
        assert extended_compare(u, w) <= 0
    assert (extended_compare(u, v) == 0) == (u == v)


def test_virtual_term_rounding():
    t = VirtualTerm(L((ia, 1)), 3, 1)
    assert t.evaluate({ia: 4}) == 2
    assert VirtualTerm(L((ia, 1)), 3, -1).evaluate({ia: 4}) == 1
    assert VirtualTerm(L((ia, 1)), 3, 1).evaluate({ia: -4}) == -1


def test_var_kinds_are_fixed():
    v = Var("k", Sort.INT, Kind.SKOLEM_K)
    with pytest.raises(Exception):
        v.kind = Kind.BOUND
