"""Command-line driver: solve one SMT-LIB file or check a directory of them."""
from __future__ import annotations

import argparse
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from qsolve.cegqi import SolverConfig, Status, Verdict, check_model, solve
from qsolve.eager import eager_verdict
from qsolve.errors import ParseError, QsolveError
from qsolve.sel_lra import BoundPreference, LraMode
from qsolve.smtlib import ParsedProblem, format_model_value, parse_file, print_problem

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_ERROR = 3
EXIT_MISMATCH = 4

_EXPECT = re.compile(r"^\s*;\s*expect:\s*(sat|unsat|unknown)\b", re.MULTILINE)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qsolve", description="Instantiation-based solver for quantified linear arithmetic.")
    p.add_argument("inputs", nargs="+", help="an .smt2 file, or a directory of them (corpus mode)")
    p.add_argument("--selector", choices=[m.value for m in LraMode],
                   help="real selector (default: lw, or fr for nested quantifiers)")
    p.add_argument("--bounds", choices=[b.value for b in BoundPreference], default="lower",
                   help="which side the selectors prefer")
    p.add_argument("--budget", type=int, default=10_000, help="maximum number of instantiations")
    p.add_argument("--trace", action="store_true", help="print one line per instantiation")
    p.add_argument("--stats", action="store_true", help="print run statistics")
    p.add_argument("--check-model", action="store_true",
                   help="re-verify sat models and unsat cores independently")
    p.add_argument("--oracle", choices=["eager"], help="compare with the eager closure oracle")
    p.add_argument("--strict-nested", action="store_true",
                   help="report unknown instead of sat on nested quantifiers")
    p.add_argument("--machine", action="store_true", help="key=value output after the verdict line")
    p.add_argument("--jobs", type=int, default=1, help="worker processes in corpus mode")
    return p


@dataclass
class RunConfig:
    inputs: list[str]
    selector: str | None = None
    bounds: str = "lower"
    budget: int = 10_000
    trace: bool = False
    stats: bool = False
    check_model: bool = False
    oracle: str | None = None
    strict_nested: bool = False
    machine: bool = False
    jobs: int = 1

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> RunConfig:
        return cls(**vars(ns))

    def solver_config(self, trace=None) -> SolverConfig:
        return SolverConfig(
            mode=LraMode(self.selector) if self.selector else None,
            bounds=BoundPreference(self.bounds),
            budget=self.budget,
            strict_nested=self.strict_nested,
            trace=trace,
        )


@dataclass
class FileResult:
    path: str
    verdict: Verdict | None
    problem: ParsedProblem | None = None
    trace: list[str] = field(default_factory=list)
    error: str = ""
    exit_code: int = EXIT_OK
    notes: list[tuple[str, str]] = field(default_factory=list)

    @property
    def status(self) -> str:
        return self.verdict.status.value if self.verdict else "unknown"


def solve_file(path: str, cfg: RunConfig) -> FileResult:
    """Parse and solve one file, running the requested self-checks."""
    try:
        problem = parse_file(path)
    except ParseError as exc:
        return FileResult(path, None, error=f"parse error: {exc}", exit_code=EXIT_PARSE)
    except OSError as exc:
        return FileResult(path, None, error=str(exc), exit_code=EXIT_USAGE)
    lines: list[str] = []
    res = FileResult(path, None, problem, lines)
    try:
        v = solve(problem.assertions, cfg.solver_config(lines.append if cfg.trace else None))
    except QsolveError as exc:
        res.error = f"internal error: {type(exc).__name__}: {exc}"
        res.exit_code = EXIT_ERROR
        return res
    res.verdict = v
    if v.status is Status.UNKNOWN and v.reason.startswith("budget"):
        res.exit_code = EXIT_ERROR
    if cfg.check_model:
        if v.is_sat:
            ok = check_model(problem.assertions, v.model)
            res.notes.append(("model-check", "ok" if ok else "FAILED"))
            if not ok:
                res.exit_code = EXIT_ERROR
        elif v.is_unsat:
            # the loop re-checks its core before returning; report it
            res.notes.append(("core-check", f"ok ({len(v.core)} instances)"))
    if cfg.oracle == "eager" and v.status is not Status.UNKNOWN:
        e = eager_verdict(problem.assertions)
        if e is None:
            res.notes.append(("oracle", "not applicable"))
        elif e == v.is_sat:
            res.notes.append(("oracle", "agrees"))
        else:
            res.notes.append(("oracle", "DISAGREES"))
            res.error = _repro(problem, v, e)
            res.exit_code = EXIT_ERROR
    return res


def _repro(problem: ParsedProblem, v: Verdict, eager_sat: bool) -> str:
    return (f"oracle disagreement: lazy={v.status.value} eager={'sat' if eager_sat else 'unsat'}\n"
            + print_problem(problem))


def _model_lines(res: FileResult) -> list[str]:
    out = []
    for var in res.problem.declared:
        val = res.verdict.model.value(var)
        out.append(f"(define-fun {var.name} () {var.sort.value} {format_model_value(val, var.sort)})")
    return out


def _stats_lines(v: Verdict) -> list[tuple[str, str]]:
    s = v.stats
    items = [("instantiations", str(s.instantiations)), ("ground_checks", str(s.ground_checks)),
             ("rounds", str(s.rounds)), ("time", f"{s.wall_time:.4f}")]
    for q, n in sorted(s.per_quant.items()):
        items.append((f"quant.{q}", str(n)))
    if s.thetas:
        items.append(("theta_final", str(s.thetas[-1])))
    return items


def report(res: FileResult, cfg: RunConfig, out=None, err=None) -> None:
    out = out or sys.stdout
    err = err or sys.stderr
    print(res.status, file=out)
    if res.error:
        print(res.error, file=err)
    v = res.verdict
    if cfg.machine:
        if v is not None:
            if v.reason:
                print(f"reason={v.reason}", file=out)
            if v.is_sat and (cfg.check_model or res.problem.get_model):
                for var in res.problem.declared:
                    print(f"model.{var.name}={format_model_value(v.model.value(var), var.sort)}", file=out)
            for line in res.trace:
                print(f"trace={line}", file=out)
            if cfg.stats:
                for k, val in _stats_lines(v):
                    print(f"{k}={val}", file=out)
        for k, val in res.notes:
            print(f"{k}={val}", file=out)
        return
    if v is None:
        return
    if v.reason:
        print(f"; reason: {v.reason}", file=out)
    if v.is_sat and (cfg.check_model or res.problem.get_model):
        for line in _model_lines(res):
            print(line, file=out)
    for line in res.trace:
        print(line, file=out)
    if cfg.stats:
        for k, val in _stats_lines(v):
            print(f"; {k}: {val}", file=out)
    for k, val in res.notes:
        print(f"; {k}: {val}", file=out)


# ---------------------------------------------------------------------------
# corpus mode


def expected_status(path: str | os.PathLike) -> str | None:
    with open(path, encoding="utf-8") as fh:
        m = _EXPECT.search(fh.read())
    return m.group(1) if m else None


@dataclass
class CorpusRow:
    name: str
    expected: str | None
    status: str
    seconds: float
    instantiations: int
    error: str = ""

    @property
    def matches(self) -> bool | None:
        if self.expected is None:
            return None
        return self.expected == self.status and not self.error


def _corpus_one(args) -> CorpusRow:
    path, cfg = args
    start = time.perf_counter()
    res = solve_file(str(path), cfg)
    n = res.verdict.stats.instantiations if res.verdict else 0
    return CorpusRow(Path(path).name, expected_status(path), res.status,
                     time.perf_counter() - start, n, res.error)


def run_corpus(directory: str | os.PathLike, cfg: RunConfig) -> tuple[list[CorpusRow], int]:
    """Solve every ``.smt2`` file; exit code is nonzero on any mismatch."""
    files = sorted(Path(directory).glob("*.smt2"))
    work = [(f, cfg) for f in files]
    if cfg.jobs > 1 and len(files) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(_corpus_one, work))
    else:
        rows = [_corpus_one(w) for w in work]
    code = EXIT_MISMATCH if any(r.matches is False for r in rows) else EXIT_OK
    return rows, code


def print_corpus(rows: Sequence[CorpusRow], cfg: RunConfig, out=None) -> None:
    out = out or sys.stdout
    if cfg.machine:
        for r in rows:
            print(f"file={r.name} expected={r.expected or '-'} status={r.status} "
                  f"time={r.seconds:.4f} instantiations={r.instantiations} "
                  f"match={'-' if r.matches is None else str(r.matches).lower()}", file=out)
        return
    width = max([len(r.name) for r in rows] + [4])
    print(f"{'file':<{width}}  expected  verdict  time(s)  inst  result", file=out)
    for r in rows:
        tag = "unchecked" if r.matches is None else ("ok" if r.matches else "MISMATCH")
        print(f"{r.name:<{width}}  {r.expected or '-':<8}  {r.status:<7}  {r.seconds:7.3f}  "
              f"{r.instantiations:4d}  {tag}", file=out)
    checked = [r for r in rows if r.matches is not None]
    ok = sum(1 for r in checked if r.matches)
    unchecked = [r.name for r in rows if r.matches is None]
    print(f"; {ok}/{len(checked)} match", file=out)
    if unchecked:
        print(f"; unchecked: {', '.join(unchecked)}", file=out)
    for r in rows:
        if r.matches is False:
            print(f"; mismatch: {r.name} (expected {r.expected}, got {r.status})", file=out)


def main(argv: Sequence[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    cfg = RunConfig.from_args(ns)
    if cfg.budget < 0 or cfg.jobs < 1:
        print("qsolve: error: --budget must be >= 0 and --jobs >= 1", file=sys.stderr)
        return EXIT_USAGE
    if len(cfg.inputs) == 1 and os.path.isdir(cfg.inputs[0]):
        rows, code = run_corpus(cfg.inputs[0], cfg)
        print_corpus(rows, cfg)
        return code
    if len(cfg.inputs) != 1:
        print("qsolve: error: exactly one input file (or one directory) expected", file=sys.stderr)
        return EXIT_USAGE
    res = solve_file(cfg.inputs[0], cfg)
    if res.exit_code == EXIT_USAGE:
        print(f"qsolve: error: {res.error}", file=sys.stderr)
        return EXIT_USAGE
    report(res, cfg)
    return res.exit_code


if __name__ == "__main__":
    sys.exit(main())
