import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from qsolve.arith import LinearTerm, Rel, Sort, Var
from qsolve.errors import ParseError
from qsolve.formula import Forall, atom, conj, disj, evaluate, forall, free_vars, iter_subformulas
from qsolve.smtlib import (
    ParsedProblem, format_model_value, format_formula, parse_smtlib, print_problem,
)

from conftest import all_problem_files
from formula_gen import random_atom, random_boolean

HEADER = "(set-logic LRA)\n(declare-fun a () Real)\n(declare-fun b () Real)\n"


def parse_assert(body: str, header: str = HEADER):
    return parse_smtlib(header + f"(assert {body})\n(check-sat)\n")


def test_declarations_and_logic():
    p = parse_assert("(< a b)")
    assert p.logic == "LRA"
    assert [v.name for v in p.declared] == ["a", "b"]
    assert p.arith_sort is Sort.REAL
    assert not p.get_model


def test_get_model_flag():
    p = parse_smtlib(HEADER + "(assert (< a 1))(check-sat)(get-model)(exit)")
    assert p.get_model


@pytest.mark.parametrize("body, env, expected", [
    ("(< (* 2 a) (- b 1))", {"a": 0, "b": 2}, True),
    ("(<= (/ a 2) 1.5)", {"a": 3, "b": 0}, True),
    ("(=> (> a 0) (> b 0))", {"a": 1, "b": -1}, False),
    ("(xor (> a 0) (> b 0))", {"a": 1, "b": -1}, True),
    ("(ite (> a 0) (> b 0) (< b 0))", {"a": -1, "b": -1}, True),
    ("(let ((c (+ a b))) (= c 3))", {"a": 1, "b": 2}, True),
    ("(! (distinct a b) :named n)", {"a": 1, "b": 1}, False),
    ("(= (> a 0) (> b 0))", {"a": 1, "b": 2}, True),
])
def test_term_semantics(body, env, expected):
    p = parse_assert(body)
    values = {v: Fraction(env[v.name]) for v in p.declared}
    assert evaluate(p.assertions[0], values) == expected


def test_quantifier_binds_fresh_variable():
    p = parse_assert("(forall ((x Real)) (or (< x a) (>= x b)))")
    f = p.assertions[0]
    assert isinstance(f, Forall)
    assert free_vars(f) == set(p.declared)


def test_shadowing_binder_is_renamed():
    p = parse_assert("(forall ((a Real)) (< a b))")
    f = p.assertions[0]
    assert isinstance(f, Forall)
    (bound,) = f.vars
    assert bound.name != "a"
    assert free_vars(f) == {v for v in p.declared if v.name == "b"}


@pytest.mark.parametrize("text, line, col", [
    ("(set-logic LRA)\n(assert (< a 1))", 2, 12),
    ("(set-logic LRA)\n(declare-fun a () Real)\n(assert (< a 1)", 3, 1),
    ("(set-logic LRA)\n(declare-fun a () Real)\n(assert (* a a))", 3, 9),
    ("(set-logic NRA)", 1, 12),
    ("(set-logic LRA)\n(declare-fun f (Real) Real)", 2, 16),
])
def test_parse_errors_have_positions(text, line, col):
    with pytest.raises(ParseError) as info:
        parse_smtlib(text)
    assert info.value.line == line
    assert info.value.col == col


@pytest.mark.parametrize("body", [
    "(< a (* a b))",          # nonlinear product
    "(< a (/ 1 b))",          # non-constant divisor
    "(< a true)",             # sort mismatch
    "(and (< a 1) b)",        # Real used as Bool
    "(< c 1)",                # undeclared
    "(< a 1 2 3",             # unbalanced
])
def test_bad_inputs_raise_parse_errors(body):
    with pytest.raises(ParseError):
        parse_assert(body)


def test_mixed_sorts_rejected():
    header = "(set-logic LIA)\n(declare-fun a () Int)\n(declare-fun r () Real)\n"
    with pytest.raises(ParseError):
        parse_assert("(< a r)", header)


def test_duplicate_declaration_rejected():
    with pytest.raises(ParseError):
        parse_smtlib("(set-logic LRA)(declare-fun a () Real)(declare-const a Real)")


@pytest.mark.parametrize("path", all_problem_files(), ids=lambda p: p.name)
def test_print_parse_round_trip(path):
    p = parse_smtlib(path.read_text())
    again = parse_smtlib(print_problem(p))
    assert again.logic == p.logic
    assert again.declared == p.declared
    # printing is a fixpoint after one round
    assert print_problem(again) == print_problem(p)


@settings(max_examples=100)
@given(st.integers(0, 10**9), st.sampled_from([Sort.REAL, Sort.INT]))
def test_random_formulas_round_trip(seed, sort):
    rng = random.Random(seed)
    a, b = Var("a", sort), Var("b", sort)
    x = Var("x", sort)
    leaves = [random_atom(rng, [a, b, x], sort) for _ in range(rng.randint(1, 4))]
    f = conj([atom(LinearTerm.of(a), Rel.GT, sort), forall([x], random_boolean(rng, leaves))])
    logic = "LIA" if sort is Sort.INT else "LRA"
    p = ParsedProblem(logic, [f], [a, b])
    q = parse_smtlib(print_problem(p))
    assert print_problem(q) == print_problem(p)


def test_integer_strict_bounds_print_non_strict():
    y = Var("y", Sort.INT)
    assert format_formula(atom(LinearTerm.of(y) + 1, Rel.GT, Sort.INT)) == "(>= y 0)"


@pytest.mark.parametrize("value, sort, text", [
    (Fraction(3), Sort.REAL, "3.0"),
    (Fraction(-3), Sort.REAL, "(- 3.0)"),
    (Fraction(-1, 2), Sort.REAL, "(- (/ 1 2))"),
    (Fraction(7), Sort.INT, "7"),
    (Fraction(-7), Sort.INT, "(- 7)"),
    (True, Sort.BOOL, "true"),
])
def test_model_values(value, sort, text):
    assert format_model_value(value, sort) == text


def test_nested_binders_print_as_quantifiers():
    p = parse_assert("(forall ((x Real)) (exists ((y Real)) (and (< x y) (< y a))))")
    text = print_problem(p)
    assert "(forall ((x Real))" in text and "(exists ((y Real))" in text
    assert sum(1 for g in iter_subformulas(parse_smtlib(text).assertions[0])
               if isinstance(g, Forall)) == 1
