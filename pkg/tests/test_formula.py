import itertools
import random

import pytest
from hypothesis import assume, given, settings, strategies as st

from qsolve.arith import LinearTerm, Rel, Sort, Var
from qsolve.formula import (
    FALSE, TRUE, And, Atom, BoolVar, Exists, Forall, FreshNames, Not, Or, Purifier, atom, conj, disj,
    eliminate_equalities, evaluate, exists, forall, free_vars, is_quantifier_free, iter_subformulas,
    mk_not, negate, purify, substitute, to_nnf, unpurify,
)

from formula_gen import random_atom, random_boolean

x, y = Var("x", Sort.INT), Var("y", Sort.INT)
p = Var("p", Sort.BOOL)


def is_nnf(f) -> bool:
    for g in iter_subformulas(f):
        if isinstance(g, Not) and not isinstance(g.arg, BoolVar):
            return False
    return True


def test_constants_fold():
    a = atom(LinearTerm.of(x), Rel.LT, Sort.INT)
    assert conj([a, FALSE]) == FALSE
    assert disj([a, TRUE]) == TRUE
    assert conj([]) == TRUE
    assert mk_not(mk_not(a)) == a


def test_ground_atoms_become_constants():
    assert atom(LinearTerm.constant(-1), Rel.LT) == TRUE
    assert atom(LinearTerm.constant(0), Rel.LT) == FALSE


def test_nnf_pushes_negation_through_quantifiers():
    body = atom(LinearTerm.of(x) - LinearTerm.of(y), Rel.GT, Sort.INT)
    f = mk_not(forall([y], body))
    g = to_nnf(f)
    assert isinstance(g, type(exists([y], body)))
    assert is_nnf(g)


def test_eliminate_equalities_splits_eq_and_neq():
    eq = atom(LinearTerm.of(x) - 3, Rel.EQ, Sort.INT)
    g = eliminate_equalities(disj([eq, mk_not(eq)]))
    for h in iter_subformulas(g):
        if isinstance(h, Atom):
            assert h.lit.effective[0] is not Rel.EQ


@st.composite
def qf_formulas(draw):
    rng = random.Random(draw(st.integers(0, 10**9)))
    leaves = [random_atom(rng, [x, y], Sort.INT) for _ in range(rng.randint(1, 5))]
    if rng.random() < 0.5:
        leaves.append(BoolVar(p))
    f = random_boolean(rng, leaves)
    return mk_not(f) if rng.random() < 0.5 else f


@settings(max_examples=150)
@given(qf_formulas())
def test_nnf_and_equality_elimination_preserve_truth(f):
    g = eliminate_equalities(to_nnf(f))
    assert is_nnf(g)
    n = negate(f)
    for vx, vy, vp in itertools.product(range(-3, 4), range(-3, 4), (False, True)):
        env = {x: vx, y: vy, p: vp}
        assert evaluate(f, env) == evaluate(g, env)
        assert evaluate(n, env) != evaluate(f, env)


def test_substitute_under_quantifier():
    body = atom(LinearTerm.of(x) - LinearTerm.of(y), Rel.LT, Sort.INT)
    g = substitute(conj([body, forall([x], body)]), {y: LinearTerm.constant(5)})
    assert free_vars(g) == {x}
    assert any(isinstance(h, Forall) and x in h.vars for h in iter_subformulas(g))


def test_substitute_refuses_to_capture():
    body = atom(LinearTerm.of(x) - LinearTerm.of(y), Rel.LT, Sort.INT)
    with pytest.raises(ValueError):
        substitute(forall([x], body), {x: LinearTerm.constant(5)})


def test_purifier_guards_universals_and_skolemizes_existentials():
    inner = atom(LinearTerm.of(x) - LinearTerm.of(y), Rel.GT, Sort.INT)
    f = conj([exists([y], atom(LinearTerm.of(y), Rel.GT, Sort.INT)), forall([x], inner)])
    ground, table = purify([f])
    assert len(table) == 1
    assert is_quantifier_free(ground[0])
    assert all(isinstance(h, (And, Or, Atom, BoolVar, Not)) for h in iter_subformulas(ground[0]))


def test_same_quantifier_shares_a_guard():
    body = atom(LinearTerm.of(x), Rel.GT, Sort.INT)
    q = forall([x], body)
    pur = Purifier(FreshNames())
    assert pur.purify(q) == pur.purify(q)
    assert len(pur.table) == 1


@settings(max_examples=80)
@given(st.integers(0, 10**9))
def test_unpurify_inverts_purify(seed):
    rng = random.Random(seed)
    leaves = [random_atom(rng, [y], Sort.INT) for _ in range(rng.randint(1, 3))]
    quantified = forall([x], disj([atom(LinearTerm.of(x) - LinearTerm.of(y), Rel.LT, Sort.INT),
                                   random_atom(rng, [x, y], Sort.INT)]))
    f = random_boolean(rng, leaves + [quantified])
    nnf = eliminate_equalities(to_nnf(f))
    # a negated universal turns into an existential, which is skolemized
    assume(not any(isinstance(h, Exists) for h in iter_subformulas(nnf)))
    ground, table = purify([f])
    assert eliminate_equalities(unpurify(ground[0], table)) == nnf


def test_quantifiers_over_no_variables_vanish():
    body = atom(LinearTerm.of(x), Rel.GT, Sort.INT)
    assert forall([], body) == body


def test_evaluate_rejects_quantifiers():
    with pytest.raises(ValueError):
        evaluate(forall([x], atom(LinearTerm.of(x), Rel.GT, Sort.INT)), {})
