"""Exact general simplex over δ-extended rationals.

Values are pairs ``(c, k)`` standing for ``c + k*δ`` with δ a positive
infinitesimal, which lets strict bounds be handled exactly.  Pivoting uses
Bland's rule, so the procedure terminates.  Conflicts are explained by the
bounds in the offending tableau row.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Sequence

from qsolve.arith import LinearTerm, Rel, Var

Pair = tuple[Fraction, Fraction]
ZERO_PAIR: Pair = (Fraction(0), Fraction(0))


def _add(p: Pair, q: Pair) -> Pair:
    return (p[0] + q[0], p[1] + q[1])


def _sub(p: Pair, q: Pair) -> Pair:
    return (p[0] - q[0], p[1] - q[1])


def _scale(p: Pair, c: Fraction) -> Pair:
    return (p[0] * c, p[1] * c)


@dataclass(frozen=True)
class Constraint:
    """``term REL 0`` tagged with an opaque reason."""

    term: LinearTerm
    rel: Rel
    tag: Hashable


@dataclass
class SimplexResult:
    sat: bool
    values: dict[Var, Pair] | None = None
    conflict: frozenset | None = None


class _Slack:
    __slots__ = ("key",)

    def __init__(self, key):
        self.key = key

    def __repr__(self):
        return f"slack({self.key})"


class Simplex:
    def __init__(self):
        self.order: dict[object, int] = {}      # variable -> Bland index
        self.lower: dict[object, tuple[Pair, Hashable]] = {}
        self.upper: dict[object, tuple[Pair, Hashable]] = {}
        self.value: dict[object, Pair] = {}
        self.rows: dict[object, dict[object, Fraction]] = {}   # basic -> row
        self.slacks: dict[LinearTerm, _Slack] = {}

    def _var(self, v) -> None:
        if v not in self.order:
            self.order[v] = len(self.order)
            self.value[v] = ZERO_PAIR

    def _bound_target(self, c: Constraint):
        """Return (variable, relation, bound value) for a constraint."""
        lin = c.term - c.term.const
        rhs = -c.term.const
        v, lead = lin.leading()
        rel = c.rel
        if lead < 0:
            rel = rel.mirror()
        lin = lin / lead
        rhs = rhs / lead
        if len(lin.vars) == 1:
            self._var(v)
            return v, rel, rhs
        s = self.slacks.get(lin)
        if s is None:
            s = _Slack(lin)
            self.slacks[lin] = s
            for x in lin.vars:
                self._var(x)
            self._var(s)
            row: dict[object, Fraction] = {}
            # express over current non-basic variables
            for x, a in lin.items():
                if x in self.rows:
                    for y, b in self.rows[x].items():
                        row[y] = row.get(y, 0) + a * b
                else:
                    row[x] = row.get(x, 0) + a
            self.rows[s] = {y: b for y, b in row.items() if b != 0}
            self.value[s] = self._row_value(self.rows[s])
        return s, rel, rhs

    def _row_value(self, row: dict) -> Pair:
        total = ZERO_PAIR
        for y, b in row.items():
            total = _add(total, _scale(self.value[y], b))
        return total

    def assert_constraint(self, c: Constraint) -> frozenset | None:
        """Add a bound; returns a conflict set if it clashes with an existing bound."""
        if c.term.is_constant():
            k = c.term.const
            ok = c.rel.holds((k > 0) - (k < 0))
            return None if ok else frozenset([c.tag])
        v, rel, b = self._bound_target(c)
        conflicts = []
        if rel in (Rel.GT, Rel.GEQ, Rel.EQ):
            bound = (b, Fraction(1) if rel is Rel.GT else Fraction(0))
            cur = self.lower.get(v)
            if cur is None or bound > cur[0]:
                self.lower[v] = (bound, c.tag)
            up = self.upper.get(v)
            if up is not None and self.lower[v][0] > up[0]:
                conflicts = [self.lower[v][1], up[1]]
        if not conflicts and rel in (Rel.LT, Rel.LEQ, Rel.EQ):
            bound = (b, Fraction(-1) if rel is Rel.LT else Fraction(0))
            cur = self.upper.get(v)
            if cur is None or bound < cur[0]:
                self.upper[v] = (bound, c.tag)
            lo = self.lower.get(v)
            if lo is not None and lo[0] > self.upper[v][0]:
                conflicts = [lo[1], self.upper[v][1]]
        if conflicts:
            return frozenset(conflicts)
        if v not in self.rows:
            val = self.value[v]
            lo = self.lower.get(v)
            up = self.upper.get(v)
            if lo is not None and val < lo[0]:
                self._update(v, lo[0])
            elif up is not None and val > up[0]:
                self._update(v, up[0])
        return None

    def _update(self, x, new: Pair):
        delta = _sub(new, self.value[x])
        for b, row in self.rows.items():
            a = row.get(x)
            if a:
                self.value[b] = _add(self.value[b], _scale(delta, a))
        self.value[x] = new

    def _pivot_and_update(self, basic, nonbasic, new: Pair):
        row = self.rows[basic]
        a = row[nonbasic]
        theta = _scale(_sub(new, self.value[basic]), 1 / a)
        self.value[basic] = new
        self.value[nonbasic] = _add(self.value[nonbasic], theta)
        for b, r in self.rows.items():
            if b is not basic:
                c = r.get(nonbasic)
                if c:
                    self.value[b] = _add(self.value[b], _scale(theta, c))
        # pivot: nonbasic = (basic - sum_{k != nonbasic} row[k] k) / a
        new_row = {basic: 1 / a}
        for k, c in row.items():
            if k is not nonbasic:
                new_row[k] = -c / a
        del self.rows[basic]
        for b, r in self.rows.items():
            c = r.pop(nonbasic, None)
            if c:
                for k, d in new_row.items():
                    nv = r.get(k, 0) + c * d
                    if nv:
                        r[k] = nv
                    else:
                        r.pop(k, None)
        self.rows[nonbasic] = new_row

    def check(self) -> frozenset | None:
        """Restore feasibility; returns None if feasible, else a conflict set."""
        while True:
            violated = None
            for b in sorted(self.rows, key=self.order.__getitem__):
                val = self.value[b]
                lo = self.lower.get(b)
                if lo is not None and val < lo[0]:
                    violated = (b, lo, True)
                    break
                up = self.upper.get(b)
                if up is not None and val > up[0]:
                    violated = (b, up, False)
                    break
            if violated is None:
                return None
            b, bound, increase = violated
            row = self.rows[b]
            chosen = None
            for x in sorted(row, key=self.order.__getitem__):
                a = row[x]
                up = self.upper.get(x)
                lo = self.lower.get(x)
                can_inc = up is None or self.value[x] < up[0]
                can_dec = lo is None or self.value[x] > lo[0]
                if increase and ((a > 0 and can_inc) or (a < 0 and can_dec)):
                    chosen = x
                    break
                if not increase and ((a < 0 and can_inc) or (a > 0 and can_dec)):
                    chosen = x
                    break
            if chosen is None:
                tags = {bound[1]}
                for x, a in row.items():
                    if increase:
                        tags.add((self.upper if a > 0 else self.lower)[x][1])
                    else:
                        tags.add((self.lower if a > 0 else self.upper)[x][1])
                return frozenset(tags)
            self._pivot_and_update(b, chosen, bound[0])

    def values_of(self, vs: Sequence[Var]) -> dict[Var, Pair]:
        return {v: self.value.get(v, ZERO_PAIR) for v in vs}


def solve_constraints(constraints: Sequence[Constraint]) -> SimplexResult:
    """Feasibility of a conjunction of linear constraints over the reals."""
    s = Simplex()
    for c in constraints:
        conflict = s.assert_constraint(c)
        if conflict is not None:
            return SimplexResult(False, conflict=conflict)
    conflict = s.check()
    if conflict is not None:
        return SimplexResult(False, conflict=conflict)
    vs = sorted({v for c in constraints for v in c.term.vars})
    return SimplexResult(True, values=s.values_of(vs))


def concretize_pairs(values: dict[Var, Pair], constraints: Sequence[Constraint]) -> dict[Var, Fraction]:
    """Pick one ε > 0 so that ``c + k*ε`` satisfies every constraint.

    Each constraint ``term REL 0`` evaluates to ``f + d*δ``; whenever ``f``
    and ``d`` pull in opposite directions ε must stay below ``|f| / |d|``.
    Half of the smallest such ratio (capped at 1) keeps all strict
    constraints strict.
    """
    eps = Fraction(1)
    for c in constraints:
        f = c.term.const
        d = Fraction(0)
        for v, a in c.term.items():
            cv, kv = values.get(v, ZERO_PAIR)
            f += a * cv
            d += a * kv
        if d != 0 and f != 0 and (f > 0) != (d > 0):
            eps = min(eps, abs(f) / abs(d) / 2)
    return {v: cv + kv * eps for v, (cv, kv) in values.items()}
