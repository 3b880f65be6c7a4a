import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from qsolve.arith import LinearTerm, Rel, Sort, Var
from qsolve.errors import ResourceLimit
from qsolve.intsolve import omega_solve, solve_int
from qsolve.simplex import Constraint

V = [Var(f"n{k}", Sort.INT) for k in range(3)]


def T(coeffs, const=0):
    return LinearTerm(dict(zip(V, coeffs)), const)


def brute(cons, n, lo=-6, hi=6):
    for point in itertools.product(range(lo, hi + 1), repeat=n):
        env = dict(zip(V, point))
        if all((t.evaluate(env) <= 0) if k == "le" else (t.evaluate(env) == 0) for k, t in cons):
            return True
    return False


def box(n, lo=-6, hi=6):
    out = []
    for v in V[:n]:
        out.append(("le", LinearTerm.of(v) - hi))
        out.append(("le", LinearTerm.constant(lo) - LinearTerm.of(v)))
    return out


def holds(cons, m):
    env = {v: m.get(v, 0) for v in V}
    return all((t.evaluate(env) <= 0) if k == "le" else (t.evaluate(env) == 0) for k, t in cons)


@pytest.mark.parametrize("cons, sat", [
    ([("eq", T([2, -2], -1))], False),                       # 2a - 2b = 1
    ([("le", T([-3], 1)), ("le", T([3], -2))], False),       # 1 <= 3a <= 2
    ([("le", T([-2, 3])), ("le", T([2, -3], -1))], True),    # 0 <= 2a - 3b <= 1
    ([("eq", T([3, 5], -1))], True),                         # 3a + 5b = 1
    ([("eq", T([6, 10, 15], -1))], True),
])
def test_known_instances(cons, sat):
    m = omega_solve(cons)
    assert (m is not None) == sat
    if m is not None:
        assert holds(cons, m)


def test_dark_shadow_gap():
    # 27 <= 11a + 13b <= 45 and -10 <= 7a - 9b <= 4 has no integer point
    cons = [("le", T([-11, -13], 27)), ("le", T([11, 13], -45)),
            ("le", T([-7, 9], -10)), ("le", T([7, -9], -4))]
    assert omega_solve(cons) is None
    assert not brute(cons, 2, -20, 20)


def test_unbounded_directions_are_fine():
    # a - 2b = 0, a >= 1000 : unbounded, needs no enumeration
    m = omega_solve([("eq", T([1, -2])), ("le", T([-1], 1000))])
    assert m is not None and m[V[0]] == 2 * m[V[1]] and m[V[0]] >= 1000


def test_budget_is_enforced():
    cons = [("le", T([-11, -13], 27)), ("le", T([11, 13], -45)),
            ("le", T([-7, 9], -10)), ("le", T([7, -9], -4))]
    with pytest.raises(ResourceLimit):
        omega_solve(cons, limit=1)


coef = st.integers(-5, 5)


@st.composite
def systems(draw):
    n = draw(st.integers(1, 3))
    cons = []
    for _ in range(draw(st.integers(1, 5))):
        kind = draw(st.sampled_from(["le", "le", "le", "eq"]))
        cons.append((kind, T([draw(coef) for _ in range(n)], draw(st.integers(-8, 8)))))
    return n, cons + box(n)


@settings(max_examples=300, deadline=None)
@given(systems())
def test_omega_matches_enumeration(system):
    n, cons = system
    m = omega_solve(cons)
    assert (m is not None) == brute(cons, n)
    if m is not None:
        assert holds(cons, m)


@settings(max_examples=150, deadline=None)
@given(systems())
def test_solve_int_model_and_core(system):
    n, cons = system
    cs = [Constraint(t, Rel.LEQ if k == "le" else Rel.EQ, idx) for idx, (k, t) in enumerate(cons)]
    r = solve_int(cs)
    assert r.sat == brute(cons, n)
    if r.sat:
        assert all(x.denominator == 1 for x in r.model.values())
        assert holds(cons, {v: int(x) for v, x in r.model.items()})
    else:
        core = [c for c in cs if c.tag in r.conflict]
        assert not solve_int(core, minimize_core=False).sat


def test_strict_constraints_are_tightened():
    # 0 < 2a < 2 has no integer solution
    two_a = LinearTerm.of(V[0]) * 2
    r = solve_int([Constraint(two_a, Rel.GT, 0), Constraint(two_a - 2, Rel.LT, 1)])
    assert not r.sat and r.conflict == frozenset({0, 1})


def test_fractional_coefficients_are_scaled():
    # a/2 + b/3 = 1/6  <->  3a + 2b = 1
    t = LinearTerm({V[0]: Fraction(1, 2), V[1]: Fraction(1, 3)}, Fraction(-1, 6))
    r = solve_int([Constraint(t, Rel.EQ, 0)])
    assert r.sat and 3 * r.model[V[0]] + 2 * r.model[V[1]] == 1
