"""Ground satisfiability for quantifier-free linear arithmetic.

A lazy SMT loop: formulas are clausified (Plaisted-Greenbaum style, using
only the positive definition of each subformula since inputs are in NNF),
a :class:`~qsolve.sat.DPLL` search finds propositionally satisfying
assignments, and the arithmetic literals of each assignment are checked by
the simplex (reals) or by :func:`~qsolve.intsolve.solve_int` (integers).
Theory conflicts become blocking clauses that are cached in the
:class:`GroundSolver` and reused by later calls.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from qsolve.arith import (
    DELTA, ExtendedValue, Kind, LinearTerm, Literal, Rel, Sort, SolvedLiteral, Var,
    infinity_level, solve_for,
)
from qsolve.errors import InvariantViolation, NotApplicable
from qsolve.formula import (
    And, Atom, BoolVar, Const, Formula, Not, Or, eliminate_equalities, evaluate,
    free_vars, iter_subformulas, to_nnf,
)
from qsolve.intsolve import solve_int
from qsolve.sat import DPLL
from qsolve.simplex import Constraint, concretize_pairs, solve_constraints


@dataclass(frozen=True)
class Model:
    """Rational/integer values for arithmetic constants, truth values for Booleans."""

    assignment: Mapping[Var, Fraction] = field(default_factory=dict)
    booleans: Mapping[Var, bool] = field(default_factory=dict)

    def value(self, v: Var):
        if v.sort is Sort.BOOL:
            return self.booleans.get(v, False)
        return self.assignment.get(v, Fraction(0))

    def extend(self, values: Mapping[Var, Fraction] = (), booleans: Mapping[Var, bool] = ()) -> Model:
        a = dict(self.assignment)
        a.update(values)
        b = dict(self.booleans)
        b.update(booleans)
        return Model(a, b)

    def restrict(self, vs: Iterable[Var]) -> Model:
        vs = set(vs)
        return Model({v: x for v, x in self.assignment.items() if v in vs},
                     {v: x for v, x in self.booleans.items() if v in vs})


@dataclass(frozen=True)
class Sat:
    model: Model

    @property
    def is_sat(self) -> bool:
        return True


@dataclass(frozen=True)
class Unsat:
    @property
    def is_sat(self) -> bool:
        return False


GroundResult = Sat | Unsat


# ---------------------------------------------------------------------------
# clausification


class _Clausifier:
    def __init__(self):
        self.var_of: dict[object, int] = {}
        self.keys: list[object] = [None]
        self.clauses: list[list[int]] = []
        self._defs: dict[Formula, int] = {}
        self.constant_false = False

    def var(self, key) -> int:
        v = self.var_of.get(key)
        if v is None:
            v = len(self.keys)
            self.var_of[key] = v
            self.keys.append(key)
        return v

    def lit(self, f: Formula) -> int | bool:
        if isinstance(f, Const):
            return f.value
        if isinstance(f, Atom):
            lit = f.lit
            if lit.negated:
                return -self.var(lit.negate())
            return self.var(lit)
        if isinstance(f, BoolVar):
            return self.var(f.var)
        if isinstance(f, Not):
            inner = self.lit(f.arg)
            return (not inner) if isinstance(inner, bool) else -inner
        d = self._defs.get(f)
        if d is not None:
            return d
        p = self.var(("def", len(self.keys)))
        self._defs[f] = p
        if isinstance(f, And):
            for a in f.args:
                la = self.lit(a)
                if la is False:
                    self.clauses.append([-p])
                elif la is not True:
                    self.clauses.append([-p, la])
        elif isinstance(f, Or):
            c = [-p]
            for a in f.args:
                la = self.lit(a)
                if la is True:
                    return p
                if la is not False:
                    c.append(la)
            self.clauses.append(c)
        else:
            raise ValueError(f"cannot clausify {type(f).__name__}")
        return p

    def assert_formula(self, f: Formula):
        if isinstance(f, And):
            for a in f.args:
                self.assert_formula(a)
            return
        if isinstance(f, Or):
            c = []
            for a in f.args:
                la = self.lit(a)
                if la is True:
                    return
                if la is not False:
                    c.append(la)
            if not c:
                self.constant_false = True
            self.clauses.append(c)
            return
        la = self.lit(f)
        if la is False:
            self.constant_false = True
        elif la is not True:
            self.clauses.append([la])


# ---------------------------------------------------------------------------
# theory checks


def _theory_sort(lits: Iterable[Literal]) -> Sort:
    for lit in lits:
        for v in lit.term.vars:
            if v.sort is Sort.INT:
                return Sort.INT
    return Sort.REAL


def _constraint(lit: Literal, tag) -> Constraint:
    rel, neq = lit.effective
    if neq:
        raise InvariantViolation("disequality reached the theory solver")
    return Constraint(lit.term, rel, tag)


def check_conjunction(lits: Sequence[Literal]) -> tuple[bool, dict[Var, Fraction] | frozenset]:
    """Satisfiability of a conjunction of literals.

    Returns ``(True, values)`` with a concrete model or ``(False, core)``
    where ``core`` is a set of indices into ``lits``.
    """
    cons = [_constraint(l, i) for i, l in enumerate(lits)]
    if _theory_sort(lits) is Sort.INT:
        r = solve_int(cons)
        if r.sat:
            return True, r.model
        return False, r.conflict
    r = solve_constraints(cons)
    if not r.sat:
        return False, r.conflict
    return True, concretize_pairs(r.values, cons)


@dataclass
class GroundStats:
    checks: int = 0
    theory_checks: int = 0
    lemmas: int = 0
    decisions: int = 0


class GroundSolver:
    """A reusable context: keeps theory lemmas learned by earlier checks."""

    def __init__(self, decision_budget: int = 200_000):
        self.decision_budget = decision_budget
        self.lemmas: dict[frozenset, None] = {}
        self.stats = GroundStats()

    def check(self, phis: Sequence[Formula], prefer: Iterable[Var] = ()) -> GroundResult:
        """Decide ``phis``; Booleans in ``prefer`` are decided true first."""
        self.stats.checks += 1
        prepared = [eliminate_equalities(to_nnf(f)) for f in phis]
        cl = _Clausifier()
        for f in prepared:
            cl.assert_formula(f)
        if cl.constant_false:
            return Unsat()
        atom_keys = {k for k in cl.keys[1:] if isinstance(k, Literal)}
        num_base = len(cl.keys) - 1
        for lemma in self.lemmas:
            if all(lit in atom_keys for lit, _ in lemma):
                cl.clauses.append([cl.var(lit) if pol else -cl.var(lit) for lit, pol in lemma])
        assert len(cl.keys) - 1 == num_base
        preferred = [cl.var_of[v] for v in prefer if v in cl.var_of]
        keys = cl.keys
        theory_vars = [i for i in range(1, len(keys)) if isinstance(keys[i], Literal)]
        sort = _theory_sort(keys[i] for i in theory_vars)
        found: dict = {}

        def theory(assignment: dict[int, bool]):
            self.stats.theory_checks += 1
            active = [i for i in theory_vars if i in assignment]
            lits = [keys[i] if assignment[i] else keys[i].negate() for i in active]
            cons = [_constraint(l, (i if assignment[i] else -i)) for l, i in zip(lits, active)]
            if sort is Sort.INT:
                r = solve_int(cons)
                if r.sat:
                    found["values"] = r.model
                    return None
                conflict = r.conflict
            else:
                r = solve_constraints(cons)
                if r.sat:
                    found["values"] = concretize_pairs(r.values, cons)
                    return None
                conflict = r.conflict
            self.stats.lemmas += 1
            lemma = frozenset((keys[abs(t)], t < 0) for t in conflict)
            self.lemmas[lemma] = None
            return list(conflict)

        solver = DPLL(len(keys) - 1, cl.clauses, preferred, self.decision_budget)
        try:
            assignment = solver.solve(theory)
        finally:
            self.stats.decisions += solver.stats.decisions
        if assignment is None:
            return Unsat()
        values: dict[Var, Fraction] = dict(found.get("values", {}))
        booleans: dict[Var, bool] = {}
        for i, val in assignment.items():
            k = keys[i]
            if isinstance(k, Var):
                booleans[k] = val
        for f in prepared:
            for v in free_vars(f):
                if v.sort is Sort.BOOL:
                    booleans.setdefault(v, False)
                else:
                    values.setdefault(v, Fraction(0))
        model = Model(values, booleans)
        for f in prepared:
            if not evaluate(f, model):
                raise InvariantViolation("ground model does not satisfy its input")
        return Sat(model)


def check_ground(phis: Sequence[Formula], solver: GroundSolver | None = None,
                 prefer: Iterable[Var] = ()) -> GroundResult:
    return (solver or GroundSolver()).check(phis, prefer)


# ---------------------------------------------------------------------------
# implicants


@dataclass(frozen=True)
class Bound:
    index: int            # position of the literal in the implicant
    solved: SolvedLiteral

    @property
    def strict(self) -> bool:
        return self.solved.rel.strict


@dataclass(frozen=True)
class Implicant:
    literals: tuple[Literal, ...]
    lower: tuple[Bound, ...] = ()
    upper: tuple[Bound, ...] = ()
    other: tuple[int, ...] = ()


def _three_valued(f: Formula, known: Mapping[Literal, bool], booleans) -> bool | None:
    if isinstance(f, Atom):
        lit = f.lit
        base = lit.negate() if lit.negated else lit
        v = known.get(base)
        if v is None:
            return None
        return v != lit.negated
    if isinstance(f, Const):
        return f.value
    if isinstance(f, BoolVar):
        return bool(booleans(f.var))
    if isinstance(f, Not):
        v = _three_valued(f.arg, known, booleans)
        return None if v is None else not v
    if isinstance(f, And):
        out: bool | None = True
        for a in f.args:
            v = _three_valued(a, known, booleans)
            if v is False:
                return False
            if v is None:
                out = None
        return out
    if isinstance(f, Or):
        out = False
        for a in f.args:
            v = _three_valued(a, known, booleans)
            if v is True:
                return True
            if v is None:
                out = None
        return out
    raise ValueError("implicants are defined for quantifier-free formulas")


def entails_propositionally(lits: Iterable[Literal], psi: Formula, booleans=lambda v: False) -> bool:
    """``lits ⊨_p psi`` treating atoms as opaque propositions."""
    known = {}
    for l in lits:
        base = l.negate() if l.negated else l
        known[base] = not l.negated
    return _three_valued(psi, known, booleans) is True


def implicant_literals(model, psi: Formula, minimize: bool = False) -> list[Literal]:
    """Literals over the atoms of ``psi`` that hold in ``model``.

    By default every atom is included with its polarity under the model.
    ``minimize`` greedily drops literals while propositional entailment of
    ``psi`` is preserved.
    """
    out: dict[Literal, None] = {}
    for g in iter_subformulas(psi):
        if isinstance(g, Atom):
            base = g.lit.negate() if g.lit.negated else g.lit
            if base in out or base.negate() in out:
                continue
            out[base if base.holds(model) else base.negate()] = None
    lits = list(out)
    if minimize:
        i = 0
        while i < len(lits):
            trial = lits[:i] + lits[i + 1:]
            if entails_propositionally(trial, psi, model.value):
                lits = trial
            else:
                i += 1
    return lits


def partition(lits: Sequence[Literal], e: Var) -> Implicant:
    lower, upper, other = [], [], []
    for i, lit in enumerate(lits):
        if e not in lit.term:
            other.append(i)
            continue
        s = solve_for(lit, e)
        if s.is_eq:
            lower.append(Bound(i, SolvedLiteral(s.coeff, e, Rel.GEQ, s.rhs)))
            upper.append(Bound(i, SolvedLiteral(s.coeff, e, Rel.LEQ, s.rhs)))
        elif s.is_lower:
            lower.append(Bound(i, s))
        else:
            upper.append(Bound(i, s))
    return Implicant(tuple(lits), tuple(lower), tuple(upper), tuple(other))


def extract_implicant(model, psi: Formula, e: Var, minimize: bool = False) -> Implicant:
    """Implicant ``M`` of ``psi`` under ``model`` split into bounds on ``e``."""
    return partition(implicant_literals(model, psi, minimize), e)


# ---------------------------------------------------------------------------
# concretization of δ and ∞


def concretize_delta(assignment: Mapping[Var, ExtendedValue | Fraction],
                     constraints: Sequence[Literal]) -> Model:
    """Replace δ and ∞ components by concrete rationals.

    Infinity levels are fixed from the lowest to the highest, each to a
    value that dominates every finite remainder at that level; δ is then
    set to half of the smallest slack that could be violated (capped at 1).
    """
    ext = {v: (x if isinstance(x, ExtendedValue) else ExtendedValue(Fraction(x)))
           for v, x in assignment.items()}
    width = max((len(x.infinite) for x in ext.values()), default=0)

    def coeffs(lit: Literal):
        f = lit.term.const
        d = Fraction(0)
        infs = [Fraction(0)] * width
        for v, a in lit.term.items():
            x = ext.get(v, ExtendedValue(Fraction(0)))
            f += a * x.finite
            d += a * x.delta
            for i, c in enumerate(x.infinite):
                infs[i] += a * c
        return f, d, infs

    big = [Fraction(0)] * width
    for level in range(width):
        bound = Fraction(1)
        for lit in constraints:
            f, d, infs = coeffs(lit)
            if any(infs[level + 1:]) or infs[level] == 0:
                continue
            rest = f + sum(infs[i] * big[i] for i in range(level)) + abs(d)
            bound = max(bound, (abs(rest) + 1) / abs(infs[level]))
        big[level] = bound
    eps = Fraction(1)
    for lit in constraints:
        f, d, infs = coeffs(lit)
        f += sum(infs[i] * big[i] for i in range(width))
        if d != 0 and f != 0 and (f > 0) != (d > 0):
            eps = min(eps, abs(f) / abs(d) / 2)
    values = {}
    for v, x in ext.items():
        values[v] = x.finite + x.delta * eps + sum(c * big[i] for i, c in enumerate(x.infinite))
    return Model(values)
