"""Chronological DPLL with two watched literals and lazy theory lemmas.

Literals are non-zero integers; ``-v`` is the negation of ``v``.  The theory
is consulted once every clause is satisfied.  A theory conflict yields a
blocking clause that is added to the clause database, after which search
resumes by flipping the most recent unflipped decision.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from qsolve.errors import ResourceLimit

TheoryCheck = Callable[[dict[int, bool]], "Sequence[int] | None"]


@dataclass
class SatStats:
    decisions: int = 0
    propagations: int = 0
    conflicts: int = 0
    theory_checks: int = 0
    lemmas: int = 0


@dataclass
class _Level:
    start: int
    lit: int
    flipped: bool = False


class DPLL:
    def __init__(self, num_vars: int, clauses: Iterable[Sequence[int]],
                 preferred: Sequence[int] = (), decision_budget: int = 1_000_000):
        self.n = num_vars
        self.value = [0] * (num_vars + 1)
        self.clauses: list[list[int]] = []
        self.watches: dict[int, list[int]] = {}
        self.trail: list[int] = []
        self.levels: list[_Level] = []
        self.preferred = list(preferred)
        self.budget = decision_budget
        self.stats = SatStats()
        self.late: list[int] = []     # clauses added during search
        self.empty = False
        self.pending_units: list[int] = []
        for c in clauses:
            self._add_initial(list(c))

    # -- clause database
    def _add_initial(self, c: list[int]):
        c = list(dict.fromkeys(c))
        if any(-l in c for l in c):
            return
        if not c:
            self.empty = True
            return
        idx = len(self.clauses)
        self.clauses.append(c)
        if len(c) == 1:
            self.pending_units.append(idx)
        else:
            self.watches.setdefault(c[0], []).append(idx)
            self.watches.setdefault(c[1], []).append(idx)

    def _lit_value(self, l: int) -> int:
        v = self.value[abs(l)]
        return v if l > 0 else -v

    def _assign(self, l: int):
        self.value[abs(l)] = 1 if l > 0 else -1
        self.trail.append(l)

    # -- propagation
    def _propagate(self, start: int) -> bool:
        """Unit propagation from trail position ``start``; False on conflict."""
        i = start
        while i < len(self.trail):
            false_lit = -self.trail[i]
            i += 1
            wl = self.watches.get(false_lit)
            if not wl:
                continue
            keep: list[int] = []
            j = 0
            conflict = False
            while j < len(wl):
                ci = wl[j]
                j += 1
                c = self.clauses[ci]
                if c[0] == false_lit:
                    c[0], c[1] = c[1], c[0]
                elif c[1] != false_lit:
                    continue    # stale watch entry
                # c[1] is the false watch
                if self._lit_value(c[0]) == 1:
                    keep.append(ci)
                    continue
                moved = False
                for k in range(2, len(c)):
                    if self._lit_value(c[k]) != -1:
                        c[1], c[k] = c[k], c[1]
                        self.watches.setdefault(c[1], []).append(ci)
                        moved = True
                        break
                if moved:
                    continue
                keep.append(ci)
                other = self._lit_value(c[0])
                if other == -1:
                    conflict = True
                    keep.extend(wl[j:])
                    break
                self.stats.propagations += 1
                self._assign(c[0])
            self.watches[false_lit] = keep
            if conflict:
                return False
        return True

    def _scan_late(self) -> bool | None:
        """Re-examine clauses added during search after a backtrack.

        Returns False on conflict, True if something was assigned, None
        otherwise.
        """
        changed = None
        for ci in self.late:
            c = self.clauses[ci]
            unassigned = [l for l in c if self._lit_value(l) == 0]
            if any(self._lit_value(l) == 1 for l in c):
                continue
            if not unassigned:
                return False
            if len(unassigned) == 1:
                self._assign(unassigned[0])
                changed = True
            if len(c) >= 2:
                self._rewatch(ci)
        return changed

    def _rewatch(self, ci: int):
        c = self.clauses[ci]
        for w in (c[0], c[1]):
            wl = self.watches.get(w)
            if wl and ci in wl:
                wl.remove(ci)
        # non-false literals first, then false ones by recency
        pos = {l: i for i, l in enumerate(self.trail)}
        c.sort(key=lambda l: (self._lit_value(l) == -1, -pos.get(-l, len(self.trail))))
        self.watches.setdefault(c[0], []).append(ci)
        self.watches.setdefault(c[1], []).append(ci)

    def add_clause(self, c: Sequence[int]):
        """Add a clause during search (typically a theory lemma)."""
        c = list(dict.fromkeys(c))
        if not c:
            self.empty = True
            return
        idx = len(self.clauses)
        self.clauses.append(c)
        self.late.append(idx)
        if len(c) >= 2:
            self.watches.setdefault(c[0], []).append(idx)
            self.watches.setdefault(c[1], []).append(idx)
            self._rewatch(idx)

    # -- search
    def _backtrack(self) -> bool:
        """Flip the most recent unflipped decision; False when none is left."""
        while self.levels:
            lvl = self.levels.pop()
            for l in self.trail[lvl.start:]:
                self.value[abs(l)] = 0
            del self.trail[lvl.start:]
            if not lvl.flipped:
                self.levels.append(_Level(lvl.start, -lvl.lit, True))
                self._assign(-lvl.lit)
                return True
        return False

    def _decide(self) -> int | None:
        for v in self.preferred:
            if self.value[v] == 0:
                return v
        for c in self.clauses:
            sat = False
            first = 0
            for l in c:
                val = self._lit_value(l)
                if val == 1:
                    sat = True
                    break
                if val == 0 and first == 0:
                    first = l
            if not sat:
                return first if first else None
        return 0

    def solve(self, theory: TheoryCheck | None = None) -> dict[int, bool] | None:
        if self.empty:
            return None
        for ci in self.pending_units:
            l = self.clauses[ci][0]
            val = self._lit_value(l)
            if val == -1:
                return None
            if val == 0:
                self._assign(l)
        head = 0
        while True:
            ok = self._propagate(head)
            if ok and self.late:
                r = self._scan_late()
                if r is False:
                    ok = False
                elif r:
                    head = 0
                    continue
            if not ok:
                self.stats.conflicts += 1
                if not self._backtrack():
                    return None
                head = len(self.trail) - 1
                continue
            head = len(self.trail)
            lit = self._decide()
            if lit is None:
                # some clause has no true and no unassigned literal
                self.stats.conflicts += 1
                if not self._backtrack():
                    return None
                head = len(self.trail) - 1
                continue
            if lit == 0:
                assignment = {v: self.value[v] == 1 for v in range(1, self.n + 1) if self.value[v]}
                if theory is not None:
                    self.stats.theory_checks += 1
                    conflict = theory(assignment)
                    if conflict is not None:
                        self.stats.lemmas += 1
                        self.add_clause([-l for l in conflict])
                        if self.empty:
                            return None
                        self.stats.conflicts += 1
                        if not self._backtrack():
                            return None
                        head = 0
                        continue
                return assignment
            self.stats.decisions += 1
            if self.stats.decisions > self.budget:
                raise ResourceLimit(f"propositional decision budget {self.budget} exhausted")
            self.levels.append(_Level(len(self.trail), lit))
            self._assign(lit)
            head = len(self.trail) - 1
