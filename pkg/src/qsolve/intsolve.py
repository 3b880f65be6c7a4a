"""Integer feasibility for conjunctions of linear constraints.

The real relaxation is tried first.  A short branch-and-bound run handles
most small problems; when its node budget runs out, the omega test
(equality elimination followed by real, dark and grey shadows) decides
the conjunction exactly and reconstructs a model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Sequence

from qsolve.arith import Kind, LinearTerm, Rel, Sort, Var, ceil_div
from qsolve.errors import ResourceLimit
from qsolve.simplex import Constraint, solve_constraints, concretize_pairs

# --------------------------------------------------------------------------
# normalization


def integral_le(c: Constraint) -> list[tuple[str, LinearTerm]]:
    """Rewrite ``c`` as non-strict integer constraints ``t <= 0`` / ``t = 0``."""
    t = c.term * c.term.denominator_lcm()
    rel = c.rel
    if rel is Rel.LT:
        return [("le", t + 1)]
    if rel is Rel.LEQ:
        return [("le", t)]
    if rel is Rel.GT:
        return [("le", -t + 1)]
    if rel is Rel.GEQ:
        return [("le", -t)]
    return [("eq", t)]


def _to_constraints(items, tag) -> list[Constraint]:
    out = []
    for kind, t in items:
        out.append(Constraint(t, Rel.LEQ if kind == "le" else Rel.EQ, tag))
    return out


@dataclass
class IntResult:
    sat: bool
    model: dict[Var, Fraction] | None = None
    conflict: frozenset | None = None


# --------------------------------------------------------------------------
# branch and bound


class _BudgetExceeded(Exception):
    pass


def _branch_and_bound(cons: list[Constraint], vs: list[Var], budget: list[int]):
    budget[0] -= 1
    if budget[0] < 0:
        raise _BudgetExceeded
    r = solve_constraints(cons)
    if not r.sat:
        return None
    vals = concretize_pairs(r.values, cons)
    for v in vs:
        x = vals.get(v, Fraction(0))
        if x.denominator != 1:
            lo = math.floor(x)
            left = cons + [Constraint(LinearTerm.of(v) - lo, Rel.LEQ, None)]
            m = _branch_and_bound(left, vs, budget)
            if m is not None:
                return m
            right = cons + [Constraint(LinearTerm.of(v) - (lo + 1), Rel.GEQ, None)]
            return _branch_and_bound(right, vs, budget)
    return {v: vals.get(v, Fraction(0)) for v in vs}


# --------------------------------------------------------------------------
# exact elimination (the omega test)


class _Budget:
    def __init__(self, limit: int):
        self.left = limit

    def tick(self):
        self.left -= 1
        if self.left < 0:
            raise ResourceLimit("integer elimination budget exhausted")


def _content(t: LinearTerm) -> int:
    g = 0
    for _, c in t.items():
        g = math.gcd(g, int(c))
    return g


def _tighten(kind: str, t: LinearTerm):
    """gcd-normalize ``t <= 0`` / ``t = 0``; True/False for ground constraints.

    ``g*s + k <= 0`` becomes ``s + ceil(k/g) <= 0``; an equality whose
    constant is not a multiple of the coefficient gcd is false.
    """
    if t.is_constant():
        return t.const <= 0 if kind == "le" else t.const == 0
    g = _content(t)
    if g > 1:
        k = int(t.const)
        if kind == "eq":
            if k % g:
                return False
            return kind, t / g
        return kind, (t - k) / g + ceil_div(k, g)
    return kind, t


def _simplify(cons: Sequence[tuple[str, LinearTerm]]) -> list[tuple[str, LinearTerm]] | None:
    """Tighten, keep the strongest of parallel bounds, detect opposite pairs.

    Returns None on a trivial contradiction.
    """
    eqs: dict[LinearTerm, None] = {}
    best: dict[LinearTerm, Fraction] = {}      # variable part -> largest constant
    for kind, t in cons:
        r = _tighten(kind, t)
        if r is True:
            continue
        if r is False:
            return None
        kind, t = r
        if kind == "eq":
            eqs[t] = None
            continue
        body = t - t.const
        if body not in best or t.const > best[body]:
            best[body] = t.const
    out: list[tuple[str, LinearTerm]] = [("eq", t) for t in eqs]
    done = set()
    for body, k in best.items():
        if body in done:
            continue
        neg = -body
        if neg in best:
            total = k + best[neg]
            if total > 0:
                return None
            if total == 0:
                out.append(("eq", body + k))
                done.update((body, neg))
                continue
        out.append(("le", body + k))
    return out


def _mod_hat(a: int, m: int) -> int:
    """Symmetric residue of ``a`` modulo ``m``, in ``[-m/2, m/2)``."""
    return a - m * math.floor(Fraction(a, m) + Fraction(1, 2))


class _Omega:
    def __init__(self, budget: _Budget):
        self.budget = budget
        self.fresh = 0

    def solve(self, cons: Sequence[tuple[str, LinearTerm]]) -> dict[Var, int] | None:
        self.budget.tick()
        live = _simplify(cons)
        if live is None:
            return None
        if not live:
            return {}
        for kind, t in live:
            if kind == "eq":
                return self._equality(live, t)
        return self._eliminate(live)

    # -- equalities
    def _equality(self, live, eq: LinearTerm):
        rest = [c for c in live if c[1] is not eq]
        unit = [v for v, a in eq.items() if abs(a) == 1]
        if unit:
            v = min(unit)
            a = eq.coeff(v)
            sol = -(eq.drop(v)) * a          # v = -rest/a with a = ±1
            m = self.solve([(k, t.subst({v: sol})) for k, t in rest])
            if m is None:
                return None
            m[v] = int(sol.evaluate(m))
            return m
        # no unit coefficient: shrink coefficients with a fresh variable
        k_var = min(eq.vars, key=lambda v: (abs(eq.coeff(v)), v.name))
        ak = int(eq.coeff(k_var))
        mod = abs(ak) + 1
        self.fresh += 1
        sigma = Var(f"!omega{self.fresh}", Sort.INT, Kind.FRESH_D)
        sign = 1 if ak > 0 else -1
        expr = LinearTerm.constant(_mod_hat(int(eq.const), mod)) - LinearTerm.of(sigma) * mod
        for v, a in eq.items():
            if v != k_var:
                expr = expr + LinearTerm.of(v) * _mod_hat(int(a), mod)
        sol = expr * sign
        m = self.solve([(k, t.subst({k_var: sol})) for k, t in live])
        if m is None:
            return None
        m[k_var] = int(sol.evaluate(m))
        m.pop(sigma, None)
        return m

    # -- inequalities
    def _cost(self, live, x: Var) -> tuple:
        lo = [abs(int(t.coeff(x))) for _, t in live if t.coeff(x) < 0]
        up = [int(t.coeff(x)) for _, t in live if t.coeff(x) > 0]
        if not lo or not up:
            return (0, 0)
        exact = all(a == 1 for a in lo) or all(b == 1 for b in up)
        return (0 if exact else 1, len(lo) * len(up) - len(lo) - len(up))

    def _eliminate(self, live):
        vs = sorted({v for _, t in live for v in t.vars})
        x = min(vs, key=lambda v: (self._cost(live, v), v.name))
        lowers, uppers, others = [], [], []
        for _, t in live:
            a = int(t.coeff(x))
            if a < 0:
                lowers.append((-a, t.drop(x)))         # -a*x >= -(rest): a x >= rest
            elif a > 0:
                uppers.append((a, -t.drop(x)))         # a x <= -rest
            else:
                others.append(("le", t))
        # lowers: (a, beta) means a*x >= beta; uppers: (b, alpha) means b*x <= alpha

        def pick(m: dict[Var, int]) -> dict[Var, int]:
            lo = max((ceil_div(int(beta.evaluate(m)), a) for a, beta in lowers), default=None)
            up = min((int(alpha.evaluate(m)) // b for b, alpha in uppers), default=None)
            m[x] = lo if lo is not None else (up if up is not None else 0)
            if up is not None and m[x] > up:
                raise ResourceLimit("integer elimination produced an empty interval")
            return m

        if not lowers or not uppers:
            m = self.solve(others)
            return None if m is None else pick(m)
        real = [("le", beta * b - alpha * a) for a, beta in lowers for b, alpha in uppers]
        exact = all(a == 1 for a, _ in lowers) or all(b == 1 for b, _ in uppers)
        if exact:
            m = self.solve(others + real)
            return None if m is None else pick(m)
        dark = [("le", beta * b - alpha * a + (a - 1) * (b - 1))
                for a, beta in lowers for b, alpha in uppers]
        m = self.solve(others + dark)
        if m is not None:
            return pick(m)
        if self.solve(others + real) is None:
            return None
        bmax = max(b for b, _ in uppers)
        for a, beta in lowers:
            for i in range((a * bmax - a - bmax) // bmax + 1):
                m = self.solve(list(live) + [("eq", LinearTerm.of(x) * a - beta - i)])
                if m is not None:
                    return m
        return None


def omega_solve(cons: Sequence[tuple[str, LinearTerm]], limit: int = 200_000) -> dict[Var, int] | None:
    """Decide a conjunction of ``('le', t)`` (``t <= 0``) and ``('eq', t)`` (``t = 0``).

    Terms have integer coefficients.  Returns an integer model or None.
    """
    return _Omega(_Budget(limit)).solve(cons)


# --------------------------------------------------------------------------
# entry point


def solve_int(constraints: Sequence[Constraint], bb_nodes: int = 8,
              minimize_core: bool = True) -> IntResult:
    """Integer feasibility; conflicts are sets of constraint tags."""
    cons = []
    for c in constraints:
        cons.extend(_to_constraints(integral_le(c), c.tag))
    vs = sorted({v for c in cons for v in c.term.vars})
    r = solve_constraints(cons)
    if not r.sat:
        return IntResult(False, conflict=r.conflict)
    model = _decide(cons, vs, bb_nodes)
    if model is not None:
        return IntResult(True, model=model)
    tags = list(dict.fromkeys(c.tag for c in constraints))
    if minimize_core:
        by_tag: dict[Hashable, list[Constraint]] = {}
        for c in cons:
            by_tag.setdefault(c.tag, []).append(c)
        core = list(tags)
        for t in tags:
            trial = [x for x in core if x != t]
            sub = [c for tt in trial for c in by_tag[tt]]
            sub_vs = sorted({v for c in sub for v in c.term.vars})
            rr = solve_constraints(sub)
            if not rr.sat or _decide(sub, sub_vs, bb_nodes) is None:
                core = trial
        tags = core
    return IntResult(False, conflict=frozenset(tags))


def _omega_input(cons: list[Constraint]) -> list[tuple[str, LinearTerm]]:
    return [("eq" if c.rel is Rel.EQ else "le", c.term) for c in cons]


def _decide(cons: list[Constraint], vs: list[Var], bb_nodes: int) -> dict[Var, Fraction] | None:
    """A short branch-and-bound run, then exact elimination."""
    try:
        return _branch_and_bound(cons, vs, [bb_nodes])
    except _BudgetExceeded:
        pass
    m = omega_solve(_omega_input(cons))
    if m is None:
        return None
    return {v: Fraction(m.get(v, 0)) for v in vs}
