"""Formula AST, normal forms, substitution and purification.

Formulas are immutable and hash-consed by structure.  Smart constructors
(:func:`conj`, :func:`disj`, :func:`atom`, :func:`mk_not`) flatten nested
connectives and fold constants, so equal formulas built in different ways
usually end up structurally equal.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping

from qsolve.arith import (
    Kind, LinearTerm, Literal, Rel, Sort, Substitution, Var, make_literal,
)
from qsolve.errors import SortError


class Formula:
    __slots__ = ()

    def __and__(self, other: Formula) -> Formula:
        return conj([self, other])

    def __or__(self, other: Formula) -> Formula:
        return disj([self, other])

    def __invert__(self) -> Formula:
        return mk_not(self)

    def __str__(self) -> str:
        from qsolve.smtlib import format_formula
        return format_formula(self)


@dataclass(frozen=True, slots=True)
class Const(Formula):
    value: bool
    _h: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_h", hash(("Const", self.value)))

    def __hash__(self):
        return self._h


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True, slots=True)
class Atom(Formula):
    lit: Literal
    _h: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_h", hash(("Atom", self.lit)))

    def __hash__(self):
        return self._h


@dataclass(frozen=True, slots=True)
class BoolVar(Formula):
    var: Var
    _h: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_h", hash(("BoolVar", self.var)))

    def __hash__(self):
        return self._h


@dataclass(frozen=True, slots=True)
class Not(Formula):
    arg: Formula
    _h: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_h", hash(("Not", self.arg)))

    def __hash__(self):
        return self._h


@dataclass(frozen=True, slots=True)
class And(Formula):
    args: tuple[Formula, ...]
    _h: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_h", hash(("And", self.args)))

    def __hash__(self):
        return self._h


@dataclass(frozen=True, slots=True)
class Or(Formula):
    args: tuple[Formula, ...]
    _h: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_h", hash(("Or", self.args)))

    def __hash__(self):
        return self._h


@dataclass(frozen=True, slots=True)
class Forall(Formula):
    vars: tuple[Var, ...]
    body: Formula
    _h: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_h", hash(("Forall", self.vars, self.body)))

    def __hash__(self):
        return self._h


@dataclass(frozen=True, slots=True)
class Exists(Formula):
    vars: tuple[Var, ...]
    body: Formula
    _h: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_h", hash(("Exists", self.vars, self.body)))

    def __hash__(self):
        return self._h


Quantifier = (Forall, Exists)


# ---------------------------------------------------------------------------
# smart constructors


def atom(term: LinearTerm, rel: Rel, sort: Sort | None = None) -> Formula:
    lit = make_literal(term, rel, sort)
    if isinstance(lit, bool):
        return TRUE if lit else FALSE
    return Atom(lit)


def lit_formula(lit: Literal | bool) -> Formula:
    if isinstance(lit, bool):
        return TRUE if lit else FALSE
    return Atom(lit)


def boolvar(v: Var) -> BoolVar:
    if v.sort is not Sort.BOOL:
        raise SortError(f"{v.name} is not Boolean")
    return BoolVar(v)


def mk_not(f: Formula) -> Formula:
    if isinstance(f, Const):
        return FALSE if f.value else TRUE
    if isinstance(f, Atom):
        return Atom(f.lit.negate())
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def _flatten(fs: Iterable[Formula], kind: type) -> list[Formula]:
    out: list[Formula] = []
    seen: set[Formula] = set()
    for f in fs:
        parts = f.args if isinstance(f, kind) else (f,)
        for p in parts:
            if p not in seen:
                seen.add(p)
                out.append(p)
    return out


def conj(fs: Iterable[Formula]) -> Formula:
    args = []
    for f in _flatten(fs, And):
        if f is FALSE or f == FALSE:
            return FALSE
        if f != TRUE:
            args.append(f)
    if not args:
        return TRUE
    if len(args) == 1:
        return args[0]
    return And(tuple(args))


def disj(fs: Iterable[Formula]) -> Formula:
    args = []
    for f in _flatten(fs, Or):
        if f == TRUE:
            return TRUE
        if f != FALSE:
            args.append(f)
    if not args:
        return FALSE
    if len(args) == 1:
        return args[0]
    return Or(tuple(args))


def implies(a: Formula, b: Formula) -> Formula:
    return disj([mk_not(a), b])


def forall(vs: Iterable[Var], body: Formula) -> Formula:
    vs = tuple(vs)
    if not vs or isinstance(body, Const):
        return body
    return Forall(vs, body)


def exists(vs: Iterable[Var], body: Formula) -> Formula:
    vs = tuple(vs)
    if not vs or isinstance(body, Const):
        return body
    return Exists(vs, body)


# ---------------------------------------------------------------------------
# normal forms


def to_nnf(f: Formula) -> Formula:
    """Negation normal form: ``Not`` only above :class:`BoolVar`."""
    return _nnf(f, False)


def negate(f: Formula) -> Formula:
    return _nnf(f, True)


def _nnf(f: Formula, neg: bool) -> Formula:
    if isinstance(f, Const):
        return FALSE if f.value == neg else TRUE
    if isinstance(f, Atom):
        return Atom(f.lit.negate()) if neg else f
    if isinstance(f, BoolVar):
        return Not(f) if neg else f
    if isinstance(f, Not):
        return _nnf(f.arg, not neg)
    if isinstance(f, And):
        parts = [_nnf(a, neg) for a in f.args]
        return disj(parts) if neg else conj(parts)
    if isinstance(f, Or):
        parts = [_nnf(a, neg) for a in f.args]
        return conj(parts) if neg else disj(parts)
    if isinstance(f, Forall):
        body = _nnf(f.body, neg)
        return exists(f.vars, body) if neg else forall(f.vars, body)
    if isinstance(f, Exists):
        body = _nnf(f.body, neg)
        return forall(f.vars, body) if neg else exists(f.vars, body)
    raise TypeError(f"not a formula: {f!r}")


def split_equality(lit: Literal) -> Formula:
    """Inequality form of an (in)equality literal; other literals unchanged."""
    rel, neq = lit.effective
    if rel is not Rel.EQ:
        return Atom(lit)
    if neq:
        return disj([atom(lit.term, Rel.LT), atom(lit.term, Rel.GT)])
    return conj([atom(lit.term, Rel.GEQ), atom(lit.term, Rel.LEQ)])


def eliminate_equalities(f: Formula) -> Formula:
    """Replace ``t = 0`` by ``t >= 0 and t <= 0`` and ``t != 0`` by ``t < 0 or t > 0``."""
    return map_atoms(f, split_equality)


def map_atoms(f: Formula, fn: Callable[[Literal], Formula]) -> Formula:
    """Rebuild ``f`` with every atom replaced by ``fn(literal)``."""
    cache: dict[Formula, Formula] = {}

    def go(g: Formula) -> Formula:
        r = cache.get(g)
        if r is not None:
            return r
        if isinstance(g, Atom):
            r = fn(g.lit)
        elif isinstance(g, (Const, BoolVar)):
            r = g
        elif isinstance(g, Not):
            r = mk_not(go(g.arg))
        elif isinstance(g, And):
            r = conj(go(a) for a in g.args)
        elif isinstance(g, Or):
            r = disj(go(a) for a in g.args)
        elif isinstance(g, Forall):
            r = forall(g.vars, go(g.body))
        elif isinstance(g, Exists):
            r = exists(g.vars, go(g.body))
        else:
            raise TypeError(f"not a formula: {g!r}")
        cache[g] = r
        return r

    return go(f)


def map_boolvars(f: Formula, fn: Callable[[Var], Formula]) -> Formula:
    def go(g: Formula) -> Formula:
        if isinstance(g, BoolVar):
            return fn(g.var)
        if isinstance(g, (Const, Atom)):
            return g
        if isinstance(g, Not):
            return mk_not(go(g.arg))
        if isinstance(g, And):
            return conj(go(a) for a in g.args)
        if isinstance(g, Or):
            return disj(go(a) for a in g.args)
        if isinstance(g, Forall):
            return forall(g.vars, go(g.body))
        if isinstance(g, Exists):
            return exists(g.vars, go(g.body))
        raise TypeError(f"not a formula: {g!r}")

    return go(f)


# ---------------------------------------------------------------------------
# substitution


def _subst_literal(lit: Literal, new_term: LinearTerm) -> Formula:
    if new_term is lit.term:
        return Atom(lit)
    out = make_literal(new_term, lit.rel)
    if isinstance(out, bool):
        out = out != lit.negated
        return TRUE if out else FALSE
    return Atom(out.negate() if lit.negated else out)


def substitute(f: Formula, mapping: Mapping[Var, LinearTerm]) -> Formula:
    """Replace variables by terms; literals are re-canonicalized.

    Virtual symbols in the replacement terms are kept inside the literals;
    :func:`qsolve.sel_lra.normalize_real` removes them afterwards.
    """
    if not mapping:
        return f
    mapping = dict(mapping)

    def on_lit(lit: Literal) -> Formula:
        return _subst_literal(lit, lit.term.subst(mapping))

    return _map_atoms_scoped(f, mapping, on_lit)


def apply_subst(target, sigma: Substitution):
    """Apply a substitution with coefficients to a term or a formula.

    For an entry ``c*e -> t`` a literal ``s REL 0`` becomes ``(c*s)σ REL 0``,
    which is equivalent because ``c > 0``.
    """
    if isinstance(target, LinearTerm):
        return sigma.apply_term(target)
    if not sigma.entries:
        return target
    scope = {e.var: None for e in sigma.entries}

    def on_lit(lit: Literal) -> Formula:
        return _subst_literal(lit, sigma.apply_term(lit.term))

    return _map_atoms_scoped(target, scope, on_lit)


def _map_atoms_scoped(f: Formula, scope: Mapping[Var, object], on_lit) -> Formula:
    def go(g: Formula) -> Formula:
        if isinstance(g, Atom):
            if not any(v in scope for v in g.lit.term.vars):
                return g
            return on_lit(g.lit)
        if isinstance(g, (Const, BoolVar)):
            return g
        if isinstance(g, Not):
            return mk_not(go(g.arg))
        if isinstance(g, And):
            return conj(go(a) for a in g.args)
        if isinstance(g, Or):
            return disj(go(a) for a in g.args)
        if isinstance(g, (Forall, Exists)):
            if any(v in scope for v in g.vars):
                raise ValueError("substitution would capture a bound variable")
            ctor = forall if isinstance(g, Forall) else exists
            return ctor(g.vars, go(g.body))
        raise TypeError(f"not a formula: {g!r}")

    return go(f)


# ---------------------------------------------------------------------------
# inspection


def iter_subformulas(f: Formula) -> Iterator[Formula]:
    stack = [f]
    while stack:
        g = stack.pop()
        yield g
        if isinstance(g, Not):
            stack.append(g.arg)
        elif isinstance(g, (And, Or)):
            stack.extend(reversed(g.args))
        elif isinstance(g, (Forall, Exists)):
            stack.append(g.body)


def atoms(f: Formula) -> list[Literal]:
    """Distinct atoms (as non-negated literals) in left-to-right order."""
    out: dict[Literal, None] = {}
    for g in iter_subformulas(f):
        if isinstance(g, Atom):
            base = g.lit if not g.lit.negated else g.lit.negate()
            out.setdefault(base, None)
    return list(out)


def literals(f: Formula) -> list[Literal]:
    out: dict[Literal, None] = {}
    for g in iter_subformulas(f):
        if isinstance(g, Atom):
            out.setdefault(g.lit, None)
    return list(out)


def free_vars(f: Formula) -> set[Var]:
    out: set[Var] = set()

    def go(g: Formula, bound: frozenset):
        if isinstance(g, Atom):
            out.update(v for v in g.lit.term.vars if v not in bound and v.kind is not Kind.VIRTUAL)
        elif isinstance(g, BoolVar):
            if g.var not in bound:
                out.add(g.var)
        elif isinstance(g, Not):
            go(g.arg, bound)
        elif isinstance(g, (And, Or)):
            for a in g.args:
                go(a, bound)
        elif isinstance(g, (Forall, Exists)):
            go(g.body, bound | set(g.vars))

    go(f, frozenset())
    return out


def is_quantifier_free(f: Formula) -> bool:
    return not any(isinstance(g, Quantifier) for g in iter_subformulas(f))


def has_virtual(f: Formula) -> bool:
    return any(isinstance(g, Atom) and g.lit.term.has_virtual() for g in iter_subformulas(f))


def size(f: Formula) -> int:
    return sum(1 for _ in iter_subformulas(f))


# ---------------------------------------------------------------------------
# evaluation


def evaluate(f: Formula, values) -> bool:
    """Truth of a quantifier-free formula.

    ``values`` is anything with a ``value(var)`` method (a ground model) or a
    plain mapping; missing arithmetic variables default to 0 and missing
    Booleans to false.  Literals containing δ or ∞ are decided in the
    extended ordering.
    """
    if not hasattr(values, "value"):
        values = MappingValues(values)
    return _eval(f, values)


def _eval(f: Formula, values) -> bool:
    if isinstance(f, Atom):
        return f.lit.holds(values)
    if isinstance(f, Const):
        return f.value
    if isinstance(f, BoolVar):
        return bool(values.value(f.var))
    if isinstance(f, Not):
        return not _eval(f.arg, values)
    if isinstance(f, And):
        return all(_eval(a, values) for a in f.args)
    if isinstance(f, Or):
        return any(_eval(a, values) for a in f.args)
    raise ValueError("cannot evaluate a quantified formula")


class MappingValues:
    __slots__ = ("m",)

    def __init__(self, m: Mapping):
        self.m = m

    def value(self, v: Var):
        if v.sort is Sort.BOOL:
            return self.m.get(v, False)
        return self.m.get(v, Fraction(0))


# ---------------------------------------------------------------------------
# fresh names and purification


class FreshNames:
    """Deterministic fresh-symbol factory; ``!`` never starts a user symbol."""

    def __init__(self):
        self._counters: dict[str, itertools.count] = {}

    def fresh(self, prefix: str, sort: Sort, kind: Kind) -> Var:
        c = self._counters.setdefault(prefix, itertools.count(1))
        return Var(f"!{prefix}{next(c)}", sort, kind)


@dataclass(eq=False)
class QuantRecord:
    """Bookkeeping for one universally quantified subformula ``∀x̄ body``."""

    index: int
    bound_vars: tuple[Var, ...]
    body: Formula
    pos_guard: Var
    neg_guard: Var | None = None
    skolems_e: tuple[Var, ...] = ()
    selection: str | None = None
    neg_body: Formula | None = None      # purified ¬body[x̄ := ē]
    instances: set = field(default_factory=set)

    @property
    def name(self) -> str:
        return self.pos_guard.name

    @property
    def formula(self) -> Forall:
        return Forall(self.bound_vars, self.body)

    @property
    def nested(self) -> bool:
        return not is_quantifier_free(self.body)


class Purifier:
    """Replaces universal subformulas by positive guards and skolemizes ∃.

    Inputs must be in NNF, so every quantifier occurs positively.  Each
    structurally distinct ``∀`` gets one record; an ``∃`` outside every
    ``∀`` is replaced by fresh constants.  Quantifiers nested below a ``∀``
    stay inside the record body until an instance of it is purified.
    """

    def __init__(self, names: FreshNames | None = None):
        self.names = names or FreshNames()
        self.table: list[QuantRecord] = []
        self._by_formula: dict[Formula, QuantRecord] = {}
        self.skolems: list[Var] = []

    def record_for(self, f: Forall) -> QuantRecord:
        rec = self._by_formula.get(f)
        if rec is None:
            guard = self.names.fresh("A", Sort.BOOL, Kind.GUARD)
            rec = QuantRecord(len(self.table), f.vars, f.body, guard)
            self.table.append(rec)
            self._by_formula[f] = rec
        return rec

    def purify(self, f: Formula) -> Formula:
        if isinstance(f, (Const, Atom, BoolVar)):
            return f
        if isinstance(f, Not):
            if not isinstance(f.arg, BoolVar):
                raise ValueError("purification expects negation normal form")
            return f
        if isinstance(f, And):
            return conj(self.purify(a) for a in f.args)
        if isinstance(f, Or):
            return disj(self.purify(a) for a in f.args)
        if isinstance(f, Forall):
            return BoolVar(self.record_for(f).pos_guard)
        if isinstance(f, Exists):
            mapping = {}
            bools = {}
            for v in f.vars:
                if v.sort is Sort.BOOL:
                    k = self.names.fresh("k", Sort.BOOL, Kind.SKOLEM_K)
                    bools[v] = BoolVar(k)
                else:
                    k = self.names.fresh("k", v.sort, Kind.SKOLEM_K)
                    mapping[v] = LinearTerm.of(k)
                self.skolems.append(k)
            body = substitute(f.body, mapping)
            if bools:
                body = map_boolvars(body, lambda b: bools.get(b, BoolVar(b)))
            return self.purify(body)
        raise TypeError(f"not a formula: {f!r}")


def purify(assertions: Iterable[Formula], names: FreshNames | None = None
           ) -> tuple[list[Formula], list[QuantRecord]]:
    p = Purifier(names)
    ground = [p.purify(eliminate_equalities(to_nnf(a))) for a in assertions]
    return ground, p.table


def unpurify(f: Formula, table: Iterable[QuantRecord]) -> Formula:
    """Inverse of purification for guard variables (skolems stay constants)."""
    by_guard = {r.pos_guard: r for r in table}

    def back(v: Var) -> Formula:
        rec = by_guard.get(v)
        return rec.formula if rec is not None else BoolVar(v)

    return map_boolvars(f, back)


def bool_vars(f: Formula) -> set[Var]:
    return {g.var for g in iter_subformulas(f) if isinstance(g, BoolVar)}

