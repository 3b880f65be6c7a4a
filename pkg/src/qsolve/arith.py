"""Exact numerics, linear terms, canonical literals and virtual values.

Everything numeric is a :class:`fractions.Fraction`.  Linear terms are
immutable affine combinations of :class:`Var` objects.  Literals are kept in
a canonical ``term REL 0`` form so that syntactically equal constraints
compare equal, which the instantiation loop relies on for duplicate
detection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import total_ordering
from typing import Iterable, Iterator, Mapping, Union

from qsolve.errors import NotApplicable, SortError

Number = Union[int, Fraction]


class Sort(Enum):
    REAL = "Real"
    INT = "Int"
    BOOL = "Bool"


class Kind(Enum):
    FREE = "free"
    BOUND = "bound"
    SKOLEM_K = "skolem-k"
    SKOLEM_E = "skolem-e"
    FRESH_D = "fresh-d"
    FRESH_M = "fresh-m"
    GUARD = "guard"
    VIRTUAL = "virtual"


@dataclass(frozen=True)
class Var:
    name: str
    sort: Sort
    kind: Kind = Kind.FREE

    def __lt__(self, other: Var) -> bool:
        return self.name < other.name

    def __repr__(self) -> str:
        return self.name


DELTA = Var("!delta", Sort.REAL, Kind.VIRTUAL)


def infinity(level: int) -> Var:
    """Symbolic positive infinity; a higher level dominates every lower one."""
    return Var(f"!inf{level}", Sort.REAL, Kind.VIRTUAL)


def infinity_level(v: Var) -> int | None:
    if v.kind is Kind.VIRTUAL and v.name.startswith("!inf"):
        return int(v.name[4:])
    return None


# ---------------------------------------------------------------------------
# rational helpers


def as_fraction(x: Number) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def is_integral(x: Number) -> bool:
    return as_fraction(x).denominator == 1


def _require_int(*xs: Number) -> list[int]:
    out = []
    for x in xs:
        f = as_fraction(x)
        if f.denominator != 1:
            raise SortError(f"integer operation applied to non-integer {f}")
        out.append(f.numerator)
    return out


def rat_mod(a: Number, b: Number) -> int:
    """Remainder in ``[0, |b|)``, whatever the signs of the operands."""
    x, m = _require_int(a, b)
    if m == 0:
        raise ZeroDivisionError("mod by zero")
    return x % abs(m)


def divides(a: Number, b: Number) -> bool:
    x, y = _require_int(a, b)
    if x == 0:
        raise ZeroDivisionError("divisibility by zero")
    return y % x == 0


def congruent(a: Number, b: Number, m: Number) -> bool:
    return rat_mod(a, m) == rat_mod(b, m)


def rat_arith(a: Number, b: Number, op: str) -> Fraction | bool | int:
    """Dispatch table over the exact operations used throughout the solver."""
    a, b = as_fraction(a), as_fraction(b)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op in ("*", "×"):
        return a * b
    if op in ("/", "÷"):
        if b == 0:
            raise ZeroDivisionError("division by zero")
        return a / b
    if op == "mod":
        return rat_mod(a, b)
    if op == "divides":
        return divides(a, b)
    if op == "cmp":
        return (a > b) - (a < b)
    raise ValueError(f"unknown operation {op!r}")


def ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def lcm(*xs: int) -> int:
    out = 1
    for x in xs:
        out = out * abs(x) // math.gcd(out, abs(x)) if x else out
    return out


# ---------------------------------------------------------------------------
# linear terms


class LinearTerm:
    """An immutable affine combination ``sum(c_i * x_i) + constant``."""

    __slots__ = ("_coeffs", "const", "_hash")

    def __init__(self, coeffs: Mapping[Var, Number] | Iterable[tuple[Var, Number]] = (), const: Number = 0):
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        acc: dict[Var, Fraction] = {}
        for v, c in items:
            c = as_fraction(c)
            if c:
                acc[v] = acc.get(v, Fraction(0)) + c
        self._coeffs = {v: acc[v] for v in sorted(acc) if acc[v] != 0}
        self.const = as_fraction(const)
        self._hash = None

    @classmethod
    def _raw(cls, coeffs: dict[Var, Fraction], const: Fraction) -> LinearTerm:
        # coeffs must already be sorted and zero-free
        t = cls.__new__(cls)
        t._coeffs = coeffs
        t.const = const
        t._hash = None
        return t

    @classmethod
    def of(cls, v: Var, c: Number = 1) -> LinearTerm:
        return cls({v: c})

    @classmethod
    def constant(cls, c: Number) -> LinearTerm:
        return cls({}, c)

    # -- inspection
    def coeff(self, v: Var) -> Fraction:
        return self._coeffs.get(v, Fraction(0))

    def items(self) -> Iterator[tuple[Var, Fraction]]:
        return iter(self._coeffs.items())

    @property
    def vars(self) -> tuple[Var, ...]:
        return tuple(self._coeffs)

    def __contains__(self, v: Var) -> bool:
        return v in self._coeffs

    def is_constant(self) -> bool:
        return not self._coeffs

    def has_virtual(self) -> bool:
        return any(v.kind is Kind.VIRTUAL for v in self._coeffs)

    def leading(self) -> tuple[Var, Fraction] | None:
        for v, c in self._coeffs.items():
            return v, c
        return None

    # -- algebra
    def __add__(self, other: LinearTerm | Number) -> LinearTerm:
        if not isinstance(other, LinearTerm):
            return LinearTerm._raw(self._coeffs, self.const + as_fraction(other))
        acc = dict(self._coeffs)
        for v, c in other._coeffs.items():
            acc[v] = acc.get(v, 0) + c
        return LinearTerm(acc, self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> LinearTerm:
        return LinearTerm._raw({v: -c for v, c in self._coeffs.items()}, -self.const)

    def __sub__(self, other: LinearTerm | Number) -> LinearTerm:
        return self + (-other)

    def __rsub__(self, other: Number) -> LinearTerm:
        return (-self) + other

    def __mul__(self, k: Number) -> LinearTerm:
        k = as_fraction(k)
        if k == 0:
            return ZERO
        return LinearTerm._raw({v: c * k for v, c in self._coeffs.items()}, self.const * k)

    __rmul__ = __mul__

    def __truediv__(self, k: Number) -> LinearTerm:
        return self * (1 / as_fraction(k))

    def drop(self, v: Var) -> LinearTerm:
        if v not in self._coeffs:
            return self
        return LinearTerm._raw({w: c for w, c in self._coeffs.items() if w != v}, self.const)

    def subst(self, mapping: Mapping[Var, LinearTerm]) -> LinearTerm:
        if not any(v in mapping for v in self._coeffs):
            return self
        acc: dict[Var, Fraction] = {}
        const = self.const
        for v, c in self._coeffs.items():
            t = mapping.get(v)
            if t is None:
                acc[v] = acc.get(v, 0) + c
            else:
                for w, d in t._coeffs.items():
                    acc[w] = acc.get(w, 0) + c * d
                const += c * t.const
        return LinearTerm(acc, const)

    def subst_coeff(self, v: Var, c: Number, t: LinearTerm) -> LinearTerm:
        """``(c * self)`` with ``c*v`` replaced by ``t``: ``(c*(d*v + s)) -> d*t + c*s``."""
        d = self.coeff(v)
        return self.drop(v) * c + t * d

    # -- integrality helpers
    def denominator_lcm(self) -> int:
        return lcm(self.const.denominator, *(c.denominator for c in self._coeffs.values()))

    def var_content(self) -> int:
        """gcd of the (integral) variable coefficients; 0 for constants."""
        g = 0
        for c in self._coeffs.values():
            g = math.gcd(g, c.numerator)
        return g

    def content(self) -> int:
        return math.gcd(self.var_content(), self.const.numerator)

    def is_integral(self) -> bool:
        return self.const.denominator == 1 and all(c.denominator == 1 for c in self._coeffs.values())

    # -- evaluation
    def evaluate(self, values: Mapping[Var, Number] | "HasValue") -> Fraction:
        get = values.value if hasattr(values, "value") else (lambda v: values.get(v, 0))
        total = self.const
        for v, c in self._coeffs.items():
            if v.kind is Kind.VIRTUAL:
                raise ValueError(f"virtual symbol {v.name} needs extended evaluation")
            total += c * get(v)
        return total

    def evaluate_ext(self, values) -> ExtendedValue:
        get = values.value if hasattr(values, "value") else (lambda v: values.get(v, 0))
        finite = self.const
        delta = Fraction(0)
        infs: dict[int, Fraction] = {}
        for v, c in self._coeffs.items():
            if v.kind is Kind.VIRTUAL:
                if v == DELTA:
                    delta += c
                else:
                    lvl = infinity_level(v)
                    infs[lvl] = infs.get(lvl, 0) + c
            else:
                finite += c * get(v)
        inf_tuple = tuple(infs.get(i, Fraction(0)) for i in range(max(infs) + 1)) if infs else ()
        return ExtendedValue(finite, delta, inf_tuple)

    # -- dunder
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LinearTerm):
            return NotImplemented
        return self.const == other.const and self._coeffs == other._coeffs

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((tuple(self._coeffs.items()), self.const))
        return self._hash

    def __repr__(self) -> str:
        return f"LinearTerm({format_term(self)})"

    def __str__(self) -> str:
        return format_term(self)


ZERO = LinearTerm()


def var(v: Var) -> LinearTerm:
    return LinearTerm.of(v)


def const(c: Number) -> LinearTerm:
    return LinearTerm.constant(c)


def format_number(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_term(t: LinearTerm) -> str:
    """Infix rendering used in traces and error messages (``2*a - b + 1/2``)."""
    parts: list[str] = []
    for v, c in t.items():
        name = "δ" if v == DELTA else ("∞" + v.name[4:] if infinity_level(v) is not None else v.name)
        mag = abs(c)
        body = name if mag == 1 else f"{format_number(mag)}*{name}"
        parts.append(("- " if c < 0 else "+ ") + body)
    if t.const or not parts:
        parts.append(("- " if t.const < 0 else "+ ") + format_number(abs(t.const)))
    s = " ".join(parts)
    return s[2:] if s.startswith("+ ") else "-" + s[2:]


# ---------------------------------------------------------------------------
# relations and literals


class Rel(Enum):
    LT = "<"
    LEQ = "<="
    GT = ">"
    GEQ = ">="
    EQ = "="

    def negate(self) -> Rel:
        return _NEGATE[self]

    def mirror(self) -> Rel:
        """Relation obtained after multiplying both sides by a negative number."""
        return _MIRROR[self]

    @property
    def strict(self) -> bool:
        return self in (Rel.LT, Rel.GT)

    def holds(self, sign: int) -> bool:
        """Truth of ``x REL 0`` given ``sign(x)``."""
        if self is Rel.LT:
            return sign < 0
        if self is Rel.LEQ:
            return sign <= 0
        if self is Rel.GT:
            return sign > 0
        if self is Rel.GEQ:
            return sign >= 0
        return sign == 0


_NEGATE = {Rel.LT: Rel.GEQ, Rel.GEQ: Rel.LT, Rel.LEQ: Rel.GT, Rel.GT: Rel.LEQ}
_MIRROR = {Rel.LT: Rel.GT, Rel.GT: Rel.LT, Rel.LEQ: Rel.GEQ, Rel.GEQ: Rel.LEQ, Rel.EQ: Rel.EQ}


@dataclass(frozen=True)
class Literal:
    """``(term rel 0)``, or its negation when ``negated`` is set.

    Canonical literals (see :func:`make_literal`) only use ``LT``, ``LEQ``
    and ``EQ``; the other two relations appear through ``negated``.
    """

    term: LinearTerm
    rel: Rel
    negated: bool = False

    @property
    def effective(self) -> tuple[Rel, bool]:
        """Relation with negation folded in; ``(EQ, True)`` is a disequality."""
        if not self.negated:
            return self.rel, False
        if self.rel is Rel.EQ:
            return Rel.EQ, True
        return self.rel.negate(), False

    def negate(self) -> Literal:
        return Literal(self.term, self.rel, not self.negated)

    def holds(self, values) -> bool:
        if self.term.has_virtual():
            s = self.term.evaluate_ext(values).sign()
        else:
            v = self.term.evaluate(values)
            s = (v > 0) - (v < 0)
        return self.rel.holds(s) != self.negated

    def __str__(self) -> str:
        rel, neq = self.effective
        return f"{self.term} {'!=' if neq else rel.value} 0"


def term_sort(t: LinearTerm) -> Sort | None:
    sorts = {v.sort for v in t.vars}
    if not sorts:
        return None
    if len(sorts) > 1:
        raise SortError(f"mixed Int/Real term {t}")
    return sorts.pop()


def make_literal(term: LinearTerm, rel: Rel, sort: Sort | None = None) -> Literal | bool:
    """Canonical literal equivalent to ``term rel 0``, or a truth constant.

    Real: leading coefficient (smallest variable name) scaled to +1.
    Int: integral coefficients with gcd 1, strict bounds tightened to ``<=``,
    leading coefficient positive.
    """
    if term.is_constant():
        c = term.const
        return rel.holds((c > 0) - (c < 0))
    sort = sort or term_sort(term)
    negated = False
    if rel is Rel.GT:
        rel, negated = Rel.LEQ, True
    elif rel is Rel.GEQ:
        rel, negated = Rel.LT, True
    if sort is Sort.INT:
        return _int_literal(term, rel, negated)
    _, lead = term.leading()
    t = term * (1 / abs(lead))
    if lead < 0:
        # -t REL 0  <=>  t MIRROR(REL) 0
        t = -t
        if rel is Rel.LT:        # t > 0  ==  not (t <= 0)
            rel, negated = Rel.LEQ, not negated
        elif rel is Rel.LEQ:     # t >= 0 ==  not (t < 0)
            rel, negated = Rel.LT, not negated
    return Literal(t, rel, negated)


def _int_literal(term: LinearTerm, rel: Rel, negated: bool) -> Literal | bool:
    scale = term.denominator_lcm()
    t = term * scale if scale != 1 else term
    for v in t.vars:
        if v.sort is not Sort.INT:
            raise SortError(f"non-integer variable {v.name} in integer literal")
    if rel is Rel.LT:
        t, rel = t + 1, Rel.LEQ
    g = t.var_content()
    k = t.const.numerator
    lead = t.leading()[1]
    if rel is Rel.EQ:
        if k % g:
            return negated
        t = LinearTerm._raw({v: c / g for v, c in t.items()}, Fraction(k // g))
        if lead < 0:
            t = -t
        return Literal(t, Rel.EQ, negated)
    # sum(a x) + k <= 0  <=>  sum(a/g x) + ceil(k/g) <= 0
    t = LinearTerm._raw({v: c / g for v, c in t.items()}, Fraction(ceil_div(k, g)))
    if lead < 0:
        # -t' <= 0  <=>  t' >= 0  <=>  not (t' + 1 <= 0)
        t = -t + 1
        negated = not negated
    return Literal(t, Rel.LEQ, negated)


@dataclass(frozen=True)
class SolvedLiteral:
    """``coeff * var rel rhs`` with ``coeff > 0`` and ``var`` absent from ``rhs``."""

    coeff: Fraction
    var: Var
    rel: Rel
    rhs: LinearTerm

    @property
    def is_lower(self) -> bool:
        return self.rel in (Rel.GT, Rel.GEQ)

    @property
    def is_upper(self) -> bool:
        return self.rel in (Rel.LT, Rel.LEQ)

    @property
    def is_eq(self) -> bool:
        return self.rel is Rel.EQ

    def __str__(self) -> str:
        lhs = self.var.name if self.coeff == 1 else f"{format_number(self.coeff)}*{self.var.name}"
        return f"{lhs} {self.rel.value} {self.rhs}"


def solve_for(lit: Literal, x: Var) -> SolvedLiteral:
    """Rewrite ``lit`` as ``c*x REL t``.

    Reals get ``c = 1``; integers keep a positive integral ``c``.  Raises
    :class:`NotApplicable` when ``x`` does not occur (the caller files the
    literal under the ``x``-free part of the implicant).
    """
    a = lit.term.coeff(x)
    if a == 0:
        raise NotApplicable(f"{x.name} does not occur in {lit}")
    rel, neq = lit.effective
    if neq:
        raise NotApplicable(f"disequality {lit} has no solved form")
    rest = lit.term.drop(x)
    # a*x + rest REL 0  <=>  a*x REL -rest
    if x.sort is Sort.INT:
        scale = lit.term.denominator_lcm()
        a, rest = a * scale, rest * scale
        if a < 0:
            return SolvedLiteral(-a, x, rel.mirror(), rest)
        return SolvedLiteral(a, x, rel, -rest)
    if a < 0:
        return SolvedLiteral(Fraction(1), x, rel.mirror(), rest / (-a))
    return SolvedLiteral(Fraction(1), x, rel, -rest / a)


# ---------------------------------------------------------------------------
# extended (virtual) values


@total_ordering
@dataclass(frozen=True)
class ExtendedValue:
    """A value ``sum(inf_i * ∞_i) + finite + delta * δ``.

    ``infinite[i]`` is the coefficient of the level-``i`` infinity; level
    ``i+1`` dominates level ``i``.  Comparison is lexicographic: infinite
    parts (highest level first), then the finite part, then the δ
    coefficient.
    """

    finite: Fraction
    delta: Fraction = Fraction(0)
    infinite: tuple[Fraction, ...] = ()

    def __post_init__(self):
        infs = tuple(as_fraction(c) for c in self.infinite)
        while infs and infs[-1] == 0:
            infs = infs[:-1]
        object.__setattr__(self, "infinite", infs)
        object.__setattr__(self, "finite", as_fraction(self.finite))
        object.__setattr__(self, "delta", as_fraction(self.delta))

    def _key(self, width: int) -> tuple:
        infs = self.infinite + (Fraction(0),) * (width - len(self.infinite))
        return tuple(reversed(infs)) + (self.finite, self.delta)

    def __lt__(self, other: ExtendedValue) -> bool:
        w = max(len(self.infinite), len(other.infinite))
        return self._key(w) < other._key(w)

    def sign(self) -> int:
        zero = ExtendedValue(Fraction(0))
        return (self > zero) - (self < zero)

    def __sub__(self, other: ExtendedValue) -> ExtendedValue:
        w = max(len(self.infinite), len(other.infinite))
        a = self.infinite + (Fraction(0),) * (w - len(self.infinite))
        b = other.infinite + (Fraction(0),) * (w - len(other.infinite))
        return ExtendedValue(self.finite - other.finite, self.delta - other.delta,
                             tuple(x - y for x, y in zip(a, b)))

    @property
    def is_finite(self) -> bool:
        return not self.infinite

    def __str__(self) -> str:
        parts = [f"{format_number(c)}∞{i}" for i, c in enumerate(self.infinite) if c]
        parts.append(format_number(self.finite))
        if self.delta:
            parts.append(f"{format_number(self.delta)}δ")
        return " + ".join(parts)


def extended_compare(a: ExtendedValue, b: ExtendedValue) -> int:
    return (a > b) - (a < b)


@dataclass(frozen=True)
class VirtualTerm:
    """A substitution term.

    For reals ``term`` may mention :data:`DELTA` and infinity symbols.  For
    integers the denoted value is ``term div^polarity div_by``: ceiling for
    polarity ``+1``, floor for ``-1``.
    """

    term: LinearTerm
    div_by: int = 1
    polarity: int = 1

    @property
    def delta_coeff(self) -> Fraction:
        return self.term.coeff(DELTA)

    @property
    def infinite(self) -> tuple[Fraction, ...]:
        return self.term.evaluate_ext({}).infinite

    @property
    def is_virtual(self) -> bool:
        return self.term.has_virtual() or self.div_by != 1

    def evaluate(self, values) -> Fraction:
        v = self.term.evaluate(values)
        if self.div_by == 1:
            return v
        n = _require_int(v)[0]
        return Fraction(ceil_div(n, self.div_by) if self.polarity > 0 else n // self.div_by)

    def __str__(self) -> str:
        if self.div_by == 1:
            return str(self.term)
        sign = "+" if self.polarity > 0 else "-"
        return f"({self.term}) div{sign} {self.div_by}"


@dataclass(frozen=True)
class SubstEntry:
    coeff: int
    var: Var
    term: LinearTerm


@dataclass(frozen=True)
class Substitution:
    """Ordered substitution with coefficients ``{c*e -> t}``."""

    entries: tuple[SubstEntry, ...] = field(default=())

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.var in seen:
                raise ValueError(f"{e.var.name} substituted twice")
            if e.coeff < 1:
                raise ValueError("substitution coefficients must be positive")
            if e.var.sort is Sort.REAL and e.coeff != 1:
                raise ValueError("real substitutions carry coefficient 1")
            seen.add(e.var)

    @classmethod
    def single(cls, v: Var, t: LinearTerm, coeff: int = 1) -> Substitution:
        return cls((SubstEntry(coeff, v, t),))

    def apply_term(self, t: LinearTerm) -> LinearTerm:
        """Apply each entry in turn; a coefficient entry scales the result by ``c``."""
        for e in self.entries:
            t = t.subst_coeff(e.var, e.coeff, e.term)
        return t
