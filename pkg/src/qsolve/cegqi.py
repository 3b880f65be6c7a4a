"""Counterexample-guided instantiation loops.

:func:`solve_one_alternation` decides ``∃k̄ ∀x̄ φ`` by repeatedly asking
for a model of ``Γ ∪ {¬φ[k̄, ē]}`` and adding the instance chosen by a
selection function.  :func:`smtqi` handles arbitrary Boolean structure
(and, best effort, nested quantifiers) through positive and negative
guards.  :func:`extract_synthesis_solution` turns an unsatisfiable core
into ``ite`` solutions for single-invocation synthesis conjectures.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

from qsolve.arith import Kind, LinearTerm, Sort, Var, VirtualTerm
from qsolve.errors import InvariantViolation, ResourceLimit, UnsupportedFeature, check
from qsolve.formula import (
    TRUE, FALSE, And, BoolVar, Const, Exists, Forall, Formula, FreshNames, Not,
    Purifier, QuantRecord, conj, disj, eliminate_equalities, evaluate, free_vars,
    is_quantifier_free, map_boolvars, mk_not, negate, substitute, to_nnf,
)
from qsolve.ground import GroundSolver, Model, Sat
from qsolve.sel_lia import canonical_key, normalize_int_div, select_lia
from qsolve.sel_lra import (
    BoundPreference, LraMode, LraSelectorMode, normalize_real, select_lra,
)


class Status(Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Instantiation:
    """One instance added by the loop."""

    quant: str
    terms: tuple[VirtualTerm, ...]
    theta: int
    instance: Formula          # φ[k̄, t̄] after normalization, before purification
    added: Formula             # what actually went into Γ
    iteration: int

    def format_terms(self) -> str:
        return "(" + ", ".join(str(t.term) for t in self.terms) + ")"


@dataclass
class RunStats:
    instantiations: int = 0
    ground_checks: int = 0
    rounds: int = 0
    wall_time: float = 0.0
    per_quant: dict[str, int] = field(default_factory=dict)
    thetas: list[int] = field(default_factory=list)

    def record(self, inst: Instantiation):
        self.instantiations += 1
        self.per_quant[inst.quant] = self.per_quant.get(inst.quant, 0) + 1
        self.thetas.append(inst.theta)


@dataclass
class Verdict:
    status: Status
    model: Model | None = None
    core: tuple[Instantiation, ...] = ()
    reason: str = ""
    instantiations: tuple[Instantiation, ...] = ()
    stats: RunStats = field(default_factory=RunStats)

    @property
    def is_sat(self) -> bool:
        return self.status is Status.SAT

    @property
    def is_unsat(self) -> bool:
        return self.status is Status.UNSAT


@dataclass
class SolverConfig:
    """Options shared by both loops.  ``mode=None`` picks a default per input."""

    mode: LraMode | None = None
    bounds: BoundPreference = BoundPreference.LOWER
    budget: int = 10_000
    check_invariants: bool = True
    strict_nested: bool = False
    minimize_implicant: bool = False
    reduce_theta: bool = True
    minimize_core: bool = True
    trace: Callable[[str], None] | None = None


def trace_line(inst: Instantiation) -> str:
    return (f"[{inst.iteration}] quant={inst.quant} terms={inst.format_terms()} "
            f"theta={inst.theta} instance={inst.instance}")


# ---------------------------------------------------------------------------
# shared helpers


def _bound_sort(vs: Sequence[Var]) -> Sort:
    sorts = {v.sort for v in vs}
    if Sort.BOOL in sorts:
        raise UnsupportedFeature("quantification over Bool is not supported")
    if len(sorts) != 1:
        raise UnsupportedFeature("mixed Int/Real quantifier prefix")
    return sorts.pop()


def _skolems(rec: QuantRecord, names: FreshNames) -> tuple[Var, ...]:
    return tuple(names.fresh("e", v.sort, Kind.SKOLEM_E) for v in rec.bound_vars)


def _subst_vars(f: Formula, xs: Sequence[Var], es: Sequence[Var]) -> Formula:
    return substitute(f, {x: LinearTerm.of(e) for x, e in zip(xs, es)})


@dataclass
class _Choice:
    terms: tuple[VirtualTerm, ...]
    theta: int
    instance: Formula
    key: object
    virtual: bool


def _select_and_instantiate(rec: QuantRecord, model, gamma, neg: Formula, es: Sequence[Var],
                            mode: LraMode, cfg: SolverConfig, names: FreshNames) -> _Choice:
    sort = _bound_sort(rec.bound_vars)
    if sort is Sort.INT:
        sel = select_lia(model, gamma, neg, es, cfg.bounds, cfg.check_invariants,
                         cfg.reduce_theta, cfg.minimize_implicant)
        inst, _ = normalize_int_div(rec.body, rec.bound_vars, sel.terms, names)
        key = ("div", canonical_key(sel.terms)) if sel.theta > 1 else inst
        return _Choice(tuple(sel.terms), sel.theta, inst, key, sel.theta > 1)
    sel = select_lra(model, gamma, neg, es, LraSelectorMode(mode, cfg.bounds),
                     cfg.check_invariants, cfg.minimize_implicant)
    raw = substitute(rec.body, {x: t.term for x, t in zip(rec.bound_vars, sel.terms)})
    inst = normalize_real(raw)
    virtual = any(t.is_virtual for t in sel.terms)
    return _Choice(tuple(sel.terms), 1, inst, inst, virtual)


def _minimize_core(base: list[Formula], insts: list[Instantiation], solver: GroundSolver,
                   enabled: bool, limit: int = 64) -> list[Instantiation]:
    core = list(insts)
    if enabled and len(core) <= limit:
        i = len(core) - 1
        while i >= 0:
            trial = core[:i] + core[i + 1:]
            if not solver.check(base + [x.added for x in trial]).is_sat:
                core = trial
            i -= 1
    check(not solver.check(base + [x.added for x in core]).is_sat,
          "unsat core does not re-check as unsatisfiable")
    return core


def _user_model(model: Model, consts: Iterable[Var]) -> Model:
    consts = list(consts)
    vals = {v: model.value(v) for v in consts if v.sort is not Sort.BOOL}
    bools = {v: bool(model.value(v)) for v in consts if v.sort is Sort.BOOL}
    return Model(vals, bools)


# ---------------------------------------------------------------------------
# one quantifier alternation


def split_prenex(phi: Formula) -> tuple[tuple[Var, ...], Formula]:
    """``∃k̄ ∀x̄ body`` (after NNF) as ``(x̄, body)``; the ∃-variables become constants."""
    f = eliminate_equalities(to_nnf(phi))
    while isinstance(f, Exists):
        f = f.body
    if is_quantifier_free(f):
        return (), f
    if not isinstance(f, Forall):
        raise UnsupportedFeature("expected a formula of the form ∃k̄ ∀x̄ φ")
    xs, body = f.vars, f.body
    while isinstance(body, Forall):
        xs, body = xs + body.vars, body.body
    if not is_quantifier_free(body):
        raise UnsupportedFeature("more than one quantifier alternation")
    return xs, body


def solve_one_alternation(phi: Formula, config: SolverConfig | None = None,
                          ground: Sequence[Formula] = (), solver: GroundSolver | None = None) -> Verdict:
    """Decide ``∃k̄ ∀x̄ φ`` (free constants play the role of k̄).

    ``ground`` holds additional quantifier-free assertions over k̄; they
    seed Γ.
    """
    cfg = config or SolverConfig()
    start = time.perf_counter()
    stats = RunStats()
    solver = solver or GroundSolver()
    xs, body = split_prenex(phi)
    base = [eliminate_equalities(to_nnf(g)) for g in ground]
    consts = set(free_vars(phi))
    for g in base:
        consts |= free_vars(g)
    if not xs:
        stats.ground_checks += 1
        r = solver.check(base + [body])
        stats.wall_time = time.perf_counter() - start
        if r.is_sat:
            return Verdict(Status.SAT, _user_model(r.model, consts), stats=stats)
        return Verdict(Status.UNSAT, stats=stats)
    names = FreshNames()
    rec = QuantRecord(0, tuple(xs), body, Var("!A1", Sort.BOOL, Kind.GUARD))
    es = _skolems(rec, names)
    rec.skolems_e = es
    neg = eliminate_equalities(negate(_subst_vars(body, xs, es)))
    rec.neg_body = neg
    mode = cfg.mode or LraMode.LW_DELTA
    rec.selection = mode.value if _bound_sort(xs) is Sort.REAL else "lia"
    gamma = list(base)
    insts: list[Instantiation] = []
    seen: set = set()
    try:
        while True:
            stats.rounds += 1
            stats.ground_checks += 1
            r = solver.check(gamma)
            if not r.is_sat:
                core = _minimize_core(base, insts, solver, cfg.minimize_core)
                stats.wall_time = time.perf_counter() - start
                return Verdict(Status.UNSAT, core=tuple(core), instantiations=tuple(insts), stats=stats)
            stats.ground_checks += 1
            r2 = solver.check(gamma + [neg])
            if not r2.is_sat:
                stats.wall_time = time.perf_counter() - start
                return Verdict(Status.SAT, _user_model(r.model, consts), instantiations=tuple(insts),
                               stats=stats)
            if len(insts) >= cfg.budget:
                raise ResourceLimit("instantiation budget exhausted")
            ch = _select_and_instantiate(rec, r2.model, gamma, neg, es, mode, cfg, names)
            if ch.key in seen:
                raise InvariantViolation(f"selection repeated an instance: {ch.instance}")
            seen.add(ch.key)
            added = eliminate_equalities(to_nnf(ch.instance))
            inst = Instantiation(rec.name, ch.terms, ch.theta, ch.instance, added, len(insts) + 1)
            insts.append(inst)
            stats.record(inst)
            if cfg.trace:
                cfg.trace(trace_line(inst))
            gamma.append(added)
    except ResourceLimit as exc:
        stats.wall_time = time.perf_counter() - start
        return Verdict(Status.UNKNOWN, reason=f"budget: {exc}", instantiations=tuple(insts), stats=stats)


# ---------------------------------------------------------------------------
# SMT integration with guards


class Smtqi:
    """State of one guarded instantiation run over a set of assertions."""

    def __init__(self, assertions: Sequence[Formula], config: SolverConfig | None = None,
                 solver: GroundSolver | None = None):
        self.cfg = config or SolverConfig()
        self.solver = solver or GroundSolver()
        self.names = FreshNames()
        self.purifier = Purifier(self.names)
        self.consts: set[Var] = set()
        for a in assertions:
            self.consts |= free_vars(a)
        self.ground = [self.purifier.purify(eliminate_equalities(to_nnf(a))) for a in assertions]
        self.nested = any(r.nested for r in self.purifier.table)
        self.mode = self.cfg.mode or (LraMode.FR_MID if self.nested else LraMode.LW_DELTA)
        self.guard_clauses: list[Formula] = []
        self.gamma: list[Formula] = list(self.ground)
        self.insts: list[Instantiation] = []
        self.seen: set = set()
        self.stats = RunStats()

    @property
    def table(self) -> list[QuantRecord]:
        return self.purifier.table

    def _check(self, extra: Sequence[Formula] = ()):
        self.stats.ground_checks += 1
        prefer = [r.neg_guard for r in self.table if r.neg_guard is not None]
        return self.solver.check(self.gamma + list(extra), prefer)

    def _activate(self, rec: QuantRecord):
        rec.neg_guard = self.names.fresh("B", Sort.BOOL, Kind.GUARD)
        rec.skolems_e = _skolems(rec, self.names)
        _bound_sort(rec.bound_vars)
        neg = eliminate_equalities(negate(_subst_vars(rec.body, rec.bound_vars, rec.skolems_e)))
        rec.neg_body = self.purifier.purify(neg)
        rec.selection = self.mode.value if rec.bound_vars[0].sort is Sort.REAL else "lia"
        a, b = BoolVar(rec.pos_guard), BoolVar(rec.neg_guard)
        clauses = [disj([a, b]), disj([Not(b), rec.neg_body])]
        self.guard_clauses += clauses
        self.gamma += clauses

    def _instantiate(self, rec: QuantRecord, model) -> str:
        """Add one instance for an active record: 'added', 'duplicate' or a failure reason."""
        if len(self.insts) >= self.cfg.budget:
            raise ResourceLimit("instantiation budget exhausted")
        ch = _select_and_instantiate(rec, model, self.gamma, rec.neg_body, rec.skolems_e,
                                     self.mode, self.cfg, self.names)
        nested_body = not is_quantifier_free(rec.body)
        if nested_body and ch.virtual and rec.bound_vars[0].sort is Sort.REAL:
            return "nested-virtual"
        key = (rec.index, ch.key)
        if key in self.seen:
            if self.cfg.check_invariants and not self.nested:
                raise InvariantViolation(f"selection repeated an instance: {ch.instance}")
            return "duplicate"
        self.seen.add(key)
        body = self.purifier.purify(eliminate_equalities(to_nnf(ch.instance)))
        added = disj([Not(BoolVar(rec.pos_guard)), body])
        inst = Instantiation(rec.name, ch.terms, ch.theta, ch.instance, added, len(self.insts) + 1)
        self.insts.append(inst)
        self.stats.record(inst)
        if self.cfg.trace:
            self.cfg.trace(trace_line(inst))
        self.gamma.append(added)
        return "added"

    def _round(self, model) -> tuple[bool, list[str]]:
        """One pass of the for-each loop; returns (changed, failure reasons)."""
        changed = False
        fails = []
        for rec in list(self.table):
            if not model.value(rec.pos_guard):
                continue
            if rec.neg_guard is None:
                self._activate(rec)
                changed = True
                continue
            if model.value(rec.neg_guard):
                res = self._instantiate(rec, model)
                if res == "added":
                    changed = True
                else:
                    fails.append(res)
        return changed, fails

    def run(self) -> Verdict:
        start = time.perf_counter()
        try:
            verdict = self._loop()
        except ResourceLimit as exc:
            verdict = Verdict(Status.UNKNOWN, reason=f"budget: {exc}")
        self.stats.wall_time = time.perf_counter() - start
        verdict.stats = self.stats
        verdict.instantiations = tuple(self.insts)
        return verdict

    def _loop(self) -> Verdict:
        while True:
            self.stats.rounds += 1
            r = self._check()
            if not r.is_sat:
                base = self.ground + self.guard_clauses
                core = _minimize_core(base, self.insts, self.solver, self.cfg.minimize_core)
                return Verdict(Status.UNSAT, core=tuple(core))
            changed, fails = self._round(r.model)
            if changed:
                continue
            # candidate fixpoint: make sure no quantifier could be made active
            for rec in self.table:
                if rec.neg_guard is None or not r.model.value(rec.pos_guard) or r.model.value(rec.neg_guard):
                    continue
                r2 = self._check([BoolVar(rec.pos_guard), BoolVar(rec.neg_guard)])
                if r2.is_sat:
                    changed, more = self._round(r2.model)
                    fails += more
                    if changed:
                        break
            if changed:
                continue
            if fails:
                return Verdict(Status.UNKNOWN, reason=fails[0])
            if self.nested and self.cfg.strict_nested:
                return Verdict(Status.UNKNOWN, reason="strict-nested")
            return Verdict(Status.SAT, _user_model(r.model, self.consts))


def smtqi(assertions: Sequence[Formula], config: SolverConfig | None = None,
          solver: GroundSolver | None = None) -> Verdict:
    return Smtqi(assertions, config, solver).run()


def is_one_alternation(assertions: Sequence[Formula]) -> bool:
    """At most one assertion is quantified and it has the shape ∃k̄ ∀x̄ φ."""
    quantified = [a for a in assertions if not is_quantifier_free(a)]
    if len(quantified) > 1:
        return False
    if not quantified:
        return True
    try:
        split_prenex(quantified[0])
    except UnsupportedFeature:
        return False
    return True


def solve(assertions: Sequence[Formula], config: SolverConfig | None = None) -> Verdict:
    """Use the one-alternation loop when it applies, the guarded loop otherwise."""
    if is_one_alternation(assertions):
        quantified = [a for a in assertions if not is_quantifier_free(a)]
        ground = [a for a in assertions if is_quantifier_free(a)]
        phi = quantified[0] if quantified else TRUE
        try:
            return solve_one_alternation(phi, config, ground)
        except UnsupportedFeature as exc:
            return Verdict(Status.UNKNOWN, reason=str(exc))
    try:
        return smtqi(assertions, config)
    except UnsupportedFeature as exc:
        return Verdict(Status.UNKNOWN, reason=str(exc))


# ---------------------------------------------------------------------------
# model checking


def _close(f: Formula, model: Model) -> Formula:
    consts = {v for v in free_vars(f) if v.sort is not Sort.BOOL}
    g = substitute(f, {v: LinearTerm.constant(model.value(v)) for v in consts})
    return map_boolvars(g, lambda v: TRUE if model.value(v) else FALSE)


def sentence_holds(f: Formula) -> bool | None:
    """Truth of a closed sentence; None when the solver cannot decide it."""
    f = eliminate_equalities(to_nnf(f))
    if is_quantifier_free(f):
        return evaluate(f, {})
    v = solve([f], SolverConfig(minimize_core=False))
    if v.status is Status.UNKNOWN:
        return None
    return v.is_sat


def check_model(assertions: Sequence[Formula], model: Model) -> bool:
    """Re-verify every assertion under ``model`` by substitution."""
    for a in assertions:
        if sentence_holds(_close(a, model)) is not True:
            return False
    return True


# ---------------------------------------------------------------------------
# synthesis


@dataclass(frozen=True)
class SynthesisConjecture:
    """``∀x̄ ∃ȳ ψ[x̄, ȳ]``: find functions ``y_j = f_j(x̄)``."""

    inputs: tuple[Var, ...]
    outputs: tuple[Var, ...]
    body: Formula

    @classmethod
    def from_formula(cls, f: Formula) -> SynthesisConjecture:
        if not (isinstance(f, Forall) and isinstance(f.body, Exists)
                and is_quantifier_free(f.body.body)):
            raise UnsupportedFeature("not a single-invocation conjecture ∀x̄ ∃ȳ ψ")
        return cls(f.vars, f.body.vars, f.body.body)


@dataclass(frozen=True)
class Leaf:
    term: VirtualTerm

    @property
    def symbolic(self) -> bool:
        return self.term.is_virtual


@dataclass(frozen=True)
class Ite:
    cond: Formula
    then: Leaf
    orelse: Leaf | Ite


SolutionTree = Leaf | Ite


def synthesis_query(spec: SynthesisConjecture) -> tuple[Formula, dict[Var, Var]]:
    """The one-alternation formula ``∃k̄ ∀ȳ ¬ψ[k̄, ȳ]`` and the input renaming."""
    if any(v.sort is Sort.BOOL for v in spec.inputs + spec.outputs):
        raise UnsupportedFeature("Boolean inputs or outputs")
    ks = {x: Var(f"!k_{x.name}", x.sort, Kind.SKOLEM_K) for x in spec.inputs}
    body = substitute(spec.body, {x: LinearTerm.of(k) for x, k in ks.items()})
    return Forall(spec.outputs, mk_not(body)), ks


def extract_synthesis_solution(core: Sequence[Instantiation], spec: SynthesisConjecture,
                               renaming: dict[Var, Var] | None = None) -> list[SolutionTree]:
    """``ite(ψ[x̄, t̄_p], t_p, ... ite(ψ[x̄, t̄_2], t_2, t_1))`` per output.

    ``core`` lists the instantiations in acquisition order; terms are
    stated over the inputs again.
    """
    if not core:
        raise ValueError("an unsatisfiable core needs at least one instantiation")
    for inst in core:
        if any(t.div_by != 1 for t in inst.terms):
            raise UnsupportedFeature("integer-division terms need the d/m encoding")
    back = {k: LinearTerm.of(x) for x, k in (renaming or {}).items()}
    tuples = [[VirtualTerm(t.term.subst(back), t.div_by, t.polarity) for t in inst.terms]
              for inst in sorted(core, key=lambda i: i.iteration)]
    out = []
    for j in range(len(spec.outputs)):
        tree: SolutionTree = Leaf(tuples[0][j])
        for tup in tuples[1:]:
            cond = substitute(spec.body, {y: t.term for y, t in zip(spec.outputs, tup)})
            tree = Ite(normalize_real(cond), Leaf(tup[j]), tree)
        out.append(tree)
    return out


def apply_solution(body: Formula, outputs: Sequence[Var], trees: Sequence[SolutionTree]) -> Formula:
    """``body[ȳ := f̄(x̄)]`` with each ``ite`` expanded into a case split."""
    f = body
    for y, tree in zip(outputs, trees):
        f = _apply_tree(f, y, tree)
    return f


def _apply_tree(f: Formula, y: Var, tree: SolutionTree) -> Formula:
    if isinstance(tree, Leaf):
        return normalize_real(substitute(f, {y: tree.term.term}))
    return disj([conj([tree.cond, _apply_tree(f, y, tree.then)]),
                 conj([negate(tree.cond), _apply_tree(f, y, tree.orelse)])])


def synthesize(spec: SynthesisConjecture, config: SolverConfig | None = None) -> list[SolutionTree] | None:
    """Solve ``spec``; None when the conjecture has no solution."""
    query, ks = synthesis_query(spec)
    v = solve_one_alternation(query, config)
    if v.status is not Status.UNSAT:
        return None
    return extract_synthesis_solution(v.core, spec, ks)


def format_tree(tree: SolutionTree) -> str:
    if isinstance(tree, Leaf):
        return str(tree.term)
    return f"ite({tree.cond}, {format_tree(tree.then)}, {format_tree(tree.orelse)})"
