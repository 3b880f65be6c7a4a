"""Reader and printer for the supported SMT-LIB 2 subset.

Supported commands: ``set-logic`` (LRA, LIA and their QF variants),
``set-info``, ``set-option``, ``declare-fun`` with arity 0,
``declare-const``, ``assert``, ``check-sat``, ``get-model`` and ``exit``.
Terms may use ``forall``, ``exists``, ``let``, ``!`` annotations, the Boolean
connectives ``and or not => xor ite =`` and linear arithmetic built from
``+ - * /`` (with at most one non-constant factor per product and constant
divisors only).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

from qsolve.arith import (
    DELTA, Kind, LinearTerm, Literal, Rel, Sort, Var, infinity_level,
)
from qsolve.errors import ParseError, QsolveError, SortError, UnsupportedFeature
from qsolve.formula import (
    FALSE, TRUE, And, Atom, BoolVar, Const, Exists, Forall, Formula, Not, Or,
    atom, conj, disj, exists, forall, mk_not,
)

# ---------------------------------------------------------------------------
# lexer


@dataclass(frozen=True)
class Token:
    text: str
    line: int
    col: int
    quoted: bool = False


@dataclass
class SList:
    items: list
    line: int
    col: int


SExpr = Union[Token, SList]

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\f]+)
  | (?P<nl>\n)
  | (?P<comment>;[^\n]*)
  | (?P<lpar>\()
  | (?P<rpar>\))
  | (?P<qsym>\|[^|]*\|)
  | (?P<string>"(?:[^"]|"")*")
  | (?P<atom>[^\s()|";]+)
""", re.VERBOSE)


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        tok = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("lpar", "rpar", "atom"):
            out.append(Token(tok, line, col))
        elif kind == "qsym":
            out.append(Token(tok[1:-1], line, col, quoted=True))
            line += tok.count("\n")
        elif kind == "string":
            out.append(Token(tok, line, col, quoted=True))
        pos = m.end()
    return out


def read_sexprs(text: str) -> list[SExpr]:
    tokens = tokenize(text)
    stack: list[SList] = []
    top: list[SExpr] = []
    for t in tokens:
        if t.text == "(" and not t.quoted:
            stack.append(SList([], t.line, t.col))
        elif t.text == ")" and not t.quoted:
            if not stack:
                raise ParseError("unbalanced ')'", t.line, t.col)
            done = stack.pop()
            (stack[-1].items if stack else top).append(done)
        else:
            (stack[-1].items if stack else top).append(t)
    if stack:
        raise ParseError("unbalanced '(': missing ')'", stack[-1].line, stack[-1].col)
    return top


# ---------------------------------------------------------------------------
# problems


@dataclass
class ParsedProblem:
    logic: str
    assertions: list[Formula] = field(default_factory=list)
    declared: list[Var] = field(default_factory=list)
    options: dict = field(default_factory=dict)
    get_model: bool = False

    @property
    def arith_sort(self) -> Sort:
        return Sort.INT if self.logic == "LIA" else Sort.REAL


_LOGICS = {"LRA": "LRA", "QF_LRA": "LRA", "LIA": "LIA", "QF_LIA": "LIA"}
_SORTS = {"Real": Sort.REAL, "Int": Sort.INT, "Bool": Sort.BOOL}
_NUMERAL = re.compile(r"^(0|[1-9][0-9]*)$")
_DECIMAL = re.compile(r"^(0|[1-9][0-9]*)\.[0-9]+$")
_REL = {"<": Rel.LT, "<=": Rel.LEQ, ">": Rel.GT, ">=": Rel.GEQ, "=": Rel.EQ}


def _loc(e: SExpr) -> tuple[int, int]:
    return e.line, e.col


def _err(e: SExpr, msg: str) -> ParseError:
    return ParseError(msg, *_loc(e))


def _symbol(e: SExpr, what: str = "symbol") -> str:
    if not isinstance(e, Token) or (e.text[0] in "0123456789\"" and not e.quoted):
        raise _err(e, f"expected {what}")
    return e.text


class _Reader:
    def __init__(self):
        self.logic: str | None = None
        self.declared: dict[str, Var] = {}
        self.used_names: set[str] = set()
        self.problem: ParsedProblem | None = None

    # -- commands
    def run(self, exprs: list[SExpr]) -> ParsedProblem:
        prob = ParsedProblem(logic="")
        self.problem = prob
        for cmd in exprs:
            if not isinstance(cmd, SList) or not cmd.items or not isinstance(cmd.items[0], Token):
                raise _err(cmd, "expected a command")
            head = cmd.items[0].text
            args = cmd.items[1:]
            if head == "set-logic":
                self._arity(cmd, args, 1)
                name = _symbol(args[0], "logic name")
                if name not in _LOGICS:
                    raise ParseError(f"unsupported logic {name}", *_loc(args[0]))
                self.logic = _LOGICS[name]
            elif head in ("set-info", "set-option"):
                if args and isinstance(args[0], Token):
                    prob.options[args[0].text] = " ".join(
                        a.text for a in args[1:] if isinstance(a, Token))
            elif head == "declare-fun":
                self._arity(cmd, args, 3)
                if not isinstance(args[1], SList) or args[1].items:
                    raise _err(args[1], "only nullary function symbols are supported")
                self._declare(args[0], args[2])
            elif head == "declare-const":
                self._arity(cmd, args, 2)
                self._declare(args[0], args[1])
            elif head == "assert":
                self._arity(cmd, args, 1)
                f = self.term(args[0], {})
                if not isinstance(f, Formula):
                    raise _err(args[0], "assertion is not Boolean")
                prob.assertions.append(f)
            elif head == "check-sat":
                pass
            elif head == "get-model":
                prob.get_model = True
            elif head == "exit":
                break
            else:
                raise _err(cmd, f"unsupported command {head}")
        if self.logic is None:
            sorts = {v.sort for v in self.declared.values()}
            self.logic = "LIA" if Sort.INT in sorts and Sort.REAL not in sorts else "LRA"
        prob.logic = self.logic
        for v in self.declared.values():
            if v.sort not in (Sort.BOOL, prob.arith_sort):
                raise ParseError(f"symbol {v.name} of sort {v.sort.value} not allowed in {prob.logic}")
        prob.declared = list(self.declared.values())
        return prob

    def _arity(self, cmd: SList, args: list, n: int):
        if len(args) != n:
            raise _err(cmd, f"{cmd.items[0].text} expects {n} argument(s)")

    def _sort(self, e: SExpr) -> Sort:
        name = _symbol(e, "sort")
        if name not in _SORTS:
            raise _err(e, f"unsupported sort {name}")
        return _SORTS[name]

    def _check_user_name(self, e: SExpr, name: str):
        if name.startswith("!"):
            raise _err(e, f"symbol {name} uses the reserved prefix '!'")

    def _declare(self, name_e: SExpr, sort_e: SExpr):
        name = _symbol(name_e)
        self._check_user_name(name_e, name)
        if name in self.declared:
            raise _err(name_e, f"symbol {name} declared twice")
        sort = self._sort(sort_e)
        if self.logic and sort not in (Sort.BOOL, Sort.INT if self.logic == "LIA" else Sort.REAL):
            raise _err(sort_e, f"sort {sort.value} not allowed in {self.logic}")
        v = Var(name, sort, Kind.FREE)
        self.declared[name] = v
        self.used_names.add(name)

    def _fresh_bound(self, name: str, sort: Sort) -> Var:
        candidate = name
        n = 0
        while candidate in self.used_names:
            n += 1
            candidate = f"{name}@{n}"
        self.used_names.add(candidate)
        return Var(candidate, sort, Kind.BOUND)

    # -- terms
    def term(self, e: SExpr, env: dict):
        try:
            return self._term(e, env)
        except ParseError:
            raise
        except QsolveError as exc:
            raise _err(e, str(exc)) from exc

    def _term(self, e: SExpr, env: dict):
        if isinstance(e, Token):
            return self._leaf(e, env)
        if not e.items:
            raise _err(e, "empty application")
        head = e.items[0]
        args = e.items[1:]
        if isinstance(head, SList):
            raise _err(head, "higher-order application")
        op = head.text
        if head.quoted:
            raise _err(head, f"unknown function {op}")
        if op in ("forall", "exists"):
            return self._quant(e, op, args, env)
        if op == "let":
            return self._let(e, args, env)
        if op == "!":
            if not args:
                raise _err(e, "annotation without a term")
            return self.term(args[0], env)
        vals = [self.term(a, env) for a in args]
        if op in ("and", "or", "not", "=>", "xor"):
            self._need_bool(e, args, vals)
            if op == "and":
                return conj(vals)
            if op == "or":
                return disj(vals)
            if op == "not":
                self._count(e, vals, 1)
                return mk_not(vals[0])
            if op == "=>":
                if len(vals) < 2:
                    raise _err(e, "=> expects at least 2 arguments")
                out = vals[-1]
                for a in reversed(vals[:-1]):
                    out = disj([mk_not(a), out])
                return out
            out = vals[0]
            for b in vals[1:]:
                out = _iff(out, b, negated=True)
            return out
        if op == "ite":
            self._count(e, vals, 3)
            c, a, b = vals
            if not isinstance(c, Formula):
                raise _err(args[0], "ite condition must be Boolean")
            if isinstance(a, Formula) and isinstance(b, Formula):
                return disj([conj([c, a]), conj([mk_not(c), b])])
            raise UnsupportedFeature("arithmetic ite is not supported")
        if op in _REL or op == "distinct":
            if len(vals) < 2:
                raise _err(e, f"{op} expects at least 2 arguments")
            if all(isinstance(v, Formula) for v in vals):
                if op == "=":
                    return conj(_iff(a, b) for a, b in zip(vals, vals[1:]))
                if op == "distinct" and len(vals) == 2:
                    return _iff(vals[0], vals[1], negated=True)
                raise _err(e, f"{op} over Booleans is not supported")
            if any(isinstance(v, Formula) for v in vals):
                raise _err(e, f"{op} mixes Boolean and arithmetic arguments")
            sort = self._arith_sort(e, vals)
            if op == "distinct":
                return conj(mk_not(atom(a - b, Rel.EQ, sort))
                            for i, a in enumerate(vals) for b in vals[i + 1:])
            rel = _REL[op]
            return conj(atom(a - b, rel, sort) for a, b in zip(vals, vals[1:]))
        if op in ("+", "-", "*", "/"):
            if any(isinstance(v, Formula) for v in vals):
                raise _err(e, f"{op} applied to a Boolean")
            if not vals:
                raise _err(e, f"{op} expects arguments")
            self._arith_sort(e, vals)
            if op == "+":
                out = vals[0]
                for v in vals[1:]:
                    out = out + v
                return out
            if op == "-":
                if len(vals) == 1:
                    return -vals[0]
                out = vals[0]
                for v in vals[1:]:
                    out = out - v
                return out
            if op == "*":
                nonconst = [v for v in vals if not v.is_constant()]
                if len(nonconst) > 1:
                    raise _err(e, "nonlinear multiplication")
                k = Fraction(1)
                for v in vals:
                    if v.is_constant():
                        k *= v.const
                return (nonconst[0] if nonconst else LinearTerm.constant(1)) * k
            out = vals[0]
            for v in vals[1:]:
                if not v.is_constant():
                    raise _err(e, "division by a non-constant")
                if v.const == 0:
                    raise _err(e, "division by zero")
                out = out / v.const
            if self.logic == "LIA" and not out.is_integral():
                raise _err(e, "non-integral constant in LIA")
            return out
        raise _err(head, f"unknown function {op}")

    def _leaf(self, t: Token, env: dict):
        s = t.text
        if not t.quoted:
            if _NUMERAL.match(s):
                return LinearTerm.constant(int(s))
            if _DECIMAL.match(s):
                if self.logic == "LIA":
                    raise _err(t, "decimal constant in LIA")
                return LinearTerm.constant(Fraction(s))
            if s == "true":
                return TRUE
            if s == "false":
                return FALSE
        if s in env:
            return env[s]
        v = self.declared.get(s)
        if v is None:
            raise _err(t, f"undeclared symbol {s}")
        return BoolVar(v) if v.sort is Sort.BOOL else LinearTerm.of(v)

    def _quant(self, e: SList, op: str, args: list, env: dict):
        if len(args) != 2 or not isinstance(args[0], SList) or not args[0].items:
            raise _err(e, f"malformed {op}")
        new_env = dict(env)
        vs: list[Var] = []
        for b in args[0].items:
            if not isinstance(b, SList) or len(b.items) != 2:
                raise _err(b, "malformed binder")
            name = _symbol(b.items[0])
            self._check_user_name(b.items[0], name)
            sort = self._sort(b.items[1])
            if self.logic and sort is not Sort.BOOL and sort is not (
                    Sort.INT if self.logic == "LIA" else Sort.REAL):
                raise _err(b.items[1], f"sort {sort.value} not allowed in {self.logic}")
            if sort is Sort.BOOL:
                raise UnsupportedFeature("quantification over Booleans is not supported")
            v = self._fresh_bound(name, sort)
            vs.append(v)
            new_env[name] = LinearTerm.of(v)
        body = self.term(args[1], new_env)
        if not isinstance(body, Formula):
            raise _err(args[1], "quantifier body is not Boolean")
        return forall(vs, body) if op == "forall" else exists(vs, body)

    def _let(self, e: SList, args: list, env: dict):
        if len(args) != 2 or not isinstance(args[0], SList):
            raise _err(e, "malformed let")
        new_env = dict(env)
        for b in args[0].items:
            if not isinstance(b, SList) or len(b.items) != 2:
                raise _err(b, "malformed let binding")
            new_env[_symbol(b.items[0])] = self.term(b.items[1], env)
        return self.term(args[1], new_env)

    def _need_bool(self, e, args, vals):
        for a, v in zip(args, vals):
            if not isinstance(v, Formula):
                raise _err(a, "expected a Boolean term")

    def _count(self, e, vals, n):
        if len(vals) != n:
            raise _err(e, f"expected {n} argument(s)")

    def _arith_sort(self, e, vals) -> Sort:
        sorts = set()
        for v in vals:
            for x in v.vars:
                sorts.add(x.sort)
        if len(sorts) > 1:
            raise _err(e, "mixed Int/Real arithmetic")
        if sorts:
            return sorts.pop()
        return Sort.INT if self.logic == "LIA" else Sort.REAL


def _iff(a: Formula, b: Formula, negated: bool = False) -> Formula:
    if negated:
        return disj([conj([a, mk_not(b)]), conj([mk_not(a), b])])
    return disj([conj([a, b]), conj([mk_not(a), mk_not(b)])])


def parse_smtlib(text: str) -> ParsedProblem:
    """Parse an SMT-LIB script; errors carry ``line:column`` positions."""
    try:
        exprs = read_sexprs(text)
        return _Reader().run(exprs)
    except ParseError:
        raise
    except (SortError, UnsupportedFeature) as exc:
        raise ParseError(str(exc)) from exc


def parse_file(path) -> ParsedProblem:
    with open(path, encoding="utf-8") as fh:
        return parse_smtlib(fh.read())


# ---------------------------------------------------------------------------
# printer


def format_symbol(v: Var) -> str:
    if v == DELTA:
        return "δ"
    lvl = infinity_level(v)
    if lvl is not None:
        return f"∞{lvl}"
    return v.name


def format_constant(c: Fraction) -> str:
    mag = abs(c)
    body = str(mag.numerator) if mag.denominator == 1 else f"(/ {mag.numerator} {mag.denominator})"
    return f"(- {body})" if c < 0 else body


def _monomial(v: Var, c: Fraction) -> str:
    if c == 1:
        return format_symbol(v)
    return f"(* {format_constant(c)} {format_symbol(v)})"


def format_linear(t: LinearTerm) -> str:
    parts = [_monomial(v, c) for v, c in t.items()]
    if t.const or not parts:
        parts.append(format_constant(t.const))
    return parts[0] if len(parts) == 1 else "(+ " + " ".join(parts) + ")"


def _sides(t: LinearTerm) -> tuple[LinearTerm, LinearTerm]:
    pos = LinearTerm([(v, c) for v, c in t.items() if c > 0])
    neg = LinearTerm([(v, -c) for v, c in t.items() if c < 0], -t.const)
    return pos, neg


def format_literal(lit: Literal) -> str:
    rel, neq = lit.effective
    term = lit.term
    if term.vars and all(v.sort is Sort.INT for v in term.vars) and term.is_integral():
        # integer strict bounds read better as non-strict ones
        if rel is Rel.GT:
            term, rel = term - 1, Rel.GEQ
        elif rel is Rel.LT:
            term, rel = term + 1, Rel.LEQ
    lhs, rhs = _sides(term)
    body = f"({rel.value} {format_linear(lhs)} {format_linear(rhs)})"
    return f"(not {body})" if neq else body


def _sexpr(f: Formula):
    """Nested lists of strings mirroring the printed structure."""
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Atom):
        return format_literal(f.lit)
    if isinstance(f, BoolVar):
        return f.var.name
    if isinstance(f, Not):
        return ["not", _sexpr(f.arg)]
    if isinstance(f, And):
        return ["and"] + [_sexpr(a) for a in f.args]
    if isinstance(f, Or):
        return ["or"] + [_sexpr(a) for a in f.args]
    if isinstance(f, (Forall, Exists)):
        q = "forall" if isinstance(f, Forall) else "exists"
        binders = "(" + " ".join(f"({v.name} {v.sort.value})" for v in f.vars) + ")"
        return [q, binders, _sexpr(f.body)]
    raise TypeError(f"not a formula: {f!r}")


def _flat(s) -> str:
    if isinstance(s, str):
        return s
    return "(" + " ".join(_flat(x) for x in s) + ")"


def _pretty(s, indent: int, width: int) -> str:
    flat = _flat(s)
    if isinstance(s, str) or indent + len(flat) <= width:
        return flat
    pad = " " * (indent + 2)
    head = s[0]
    rest = s[1:]
    if head in ("forall", "exists"):
        return f"({head} {rest[0]}\n{pad}{_pretty(rest[1], indent + 2, width)})"
    lines = [f"({head}"] + [pad + _pretty(x, indent + 2, width) for x in rest]
    return "\n".join(lines) + ")"


def format_formula(f: Formula, pretty: bool = False, indent: int = 0, width: int = 80) -> str:
    s = _sexpr(f)
    return _pretty(s, indent, width) if pretty else _flat(s)


def print_problem(p: ParsedProblem) -> str:
    lines = [f"(set-logic {p.logic})"]
    for v in p.declared:
        lines.append(f"(declare-fun {v.name} () {v.sort.value})")
    for a in p.assertions:
        lines.append("(assert " + format_formula(a, pretty=True, indent=8) + ")")
    lines.append("(check-sat)")
    if p.get_model:
        lines.append("(get-model)")
    return "\n".join(lines) + "\n"


def format_model_value(c, sort: Sort) -> str:
    if isinstance(c, bool):
        return "true" if c else "false"
    c = Fraction(c)
    if sort is Sort.REAL and c.denominator == 1:
        s = f"{abs(c.numerator)}.0"
        return f"(- {s})" if c < 0 else s
    return format_constant(c)
