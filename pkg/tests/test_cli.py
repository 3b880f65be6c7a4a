import shutil
import subprocess
import sys

import pytest

from qsolve.cli import EXIT_ERROR, EXIT_MISMATCH, EXIT_OK, EXIT_PARSE, EXIT_USAGE, main

from conftest import CORPUS, problem_path

VERDICTS = {"sat", "unsat", "unknown"}


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out.splitlines(), err


def test_sat_with_model(capsys, tmp_path):
    path = problem_path("lra_bounds_sat")
    code, out, _ = run(capsys, path, "--check-model")
    assert code == EXIT_OK
    assert out[0] == "sat"
    defs = [l for l in out if l.startswith("(define-fun")]
    assert [l.split()[1] for l in defs] == ["a", "b"]
    assert "; model-check: ok" in out
    # pinning the printed values keeps the problem satisfiable
    pins = []
    for line in defs:
        parts = line.split()
        pins.append(f"(assert (= {parts[1]} {' '.join(parts[4:])[:-1]}))")
    pinned = tmp_path / "pinned.smt2"
    pinned.write_text(path.read_text().replace("(check-sat)", "\n".join(pins) + "\n(check-sat)"))
    code, out, _ = run(capsys, pinned)
    assert (code, out[0]) == (EXIT_OK, "sat")


def test_unsat_core_check(capsys):
    code, out, _ = run(capsys, problem_path("lra_bounds_unsat"), "--check-model")
    assert code == EXIT_OK and out[0] == "unsat"
    assert any(l.startswith("; core-check: ok") for l in out)


def test_trace_lines(capsys):
    code, out, _ = run(capsys, problem_path("lia_congruence"), "--trace")
    assert code == EXIT_OK and out[0] == "unsat"
    trace = [l for l in out if l.startswith("[")]
    assert len(trace) == 3
    assert all(" quant=!A1 " in l and " theta=3 " in l for l in trace)


def test_stats_and_machine_mode(capsys):
    code, out, _ = run(capsys, problem_path("lia_coefficients"), "--stats", "--machine")
    assert code == EXIT_OK and out[0] == "unsat"
    kv = dict(l.split("=", 1) for l in out[1:])
    assert kv["instantiations"] == "1"
    assert kv["theta_final"] == "12"


@pytest.mark.parametrize("selector", ["simple", "lw", "fr", "lw-inf", "fr-inf"])
@pytest.mark.parametrize("bounds", ["lower", "upper"])
def test_selector_flags(capsys, selector, bounds):
    code, out, _ = run(capsys, problem_path("lra_two_vars"), "--selector", selector, "--bounds", bounds)
    assert code == EXIT_OK and out[0] == "unsat"


def test_oracle_agrees(capsys):
    code, out, _ = run(capsys, problem_path("lra_boolean"), "--oracle", "eager")
    assert code == EXIT_OK
    assert "; oracle: agrees" in out


def test_oracle_not_applicable_on_nested(capsys):
    code, out, _ = run(capsys, problem_path("lia_nested"), "--oracle", "eager")
    assert code == EXIT_OK and out[0] == "sat"
    assert "; oracle: not applicable" in out


def test_budget_exit_code(capsys):
    code, out, _ = run(capsys, problem_path("lia_congruence"), "--budget", "1")
    assert code == EXIT_ERROR
    assert out[0] == "unknown"
    assert out[1].startswith("; reason: budget")


def test_parse_error_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.smt2"
    bad.write_text("(set-logic LRA)\n(assert (< a 1))\n")
    code, out, err = run(capsys, bad)
    assert code == EXIT_PARSE
    assert out[0] == "unknown"
    assert "2:12" in err


def test_usage_errors(capsys, tmp_path):
    assert main([str(tmp_path / "missing.smt2")]) == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main(["--selector", "nope", str(problem_path("lra_bounds_sat"))])
    assert info.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == EXIT_USAGE
    f = str(problem_path("lra_bounds_sat"))
    assert main([f, f]) == EXIT_USAGE
    assert main([f, "--budget", "-1"]) == EXIT_USAGE
    out, _ = capsys.readouterr()
    assert out == ""


def test_corpus_mode(capsys):
    code, out, _ = run(capsys, CORPUS)
    assert code == EXIT_OK
    n = len(list(CORPUS.glob("*.smt2")))
    assert f"; {n}/{n} match" in out


def test_corpus_mode_parallel(capsys):
    code, out, _ = run(capsys, CORPUS, "--jobs", "2", "--machine")
    assert code == EXIT_OK
    assert all("match=true" in l for l in out)


def test_empty_corpus(capsys, tmp_path):
    code, out, _ = run(capsys, tmp_path)
    assert code == EXIT_OK
    assert "; 0/0 match" in out


def test_corpus_mismatch_names_file(capsys, tmp_path):
    src = problem_path("lra_bounds_sat").read_text().replace("; expect: sat", "; expect: unsat")
    (tmp_path / "wrong.smt2").write_text(src)
    shutil.copy(problem_path("lra_bounds_unsat"), tmp_path / "right.smt2")
    (tmp_path / "plain.smt2").write_text("(set-logic LRA)(declare-fun a () Real)(assert (< a 1))")
    code, out, _ = run(capsys, tmp_path)
    assert code == EXIT_MISMATCH
    assert "; mismatch: wrong.smt2 (expected unsat, got sat)" in out
    assert "; unchecked: plain.smt2" in out
    assert "; 1/2 match" in out


@pytest.mark.parametrize("path", sorted(CORPUS.glob("*.smt2")), ids=lambda p: p.name)
def test_first_line_is_verdict(capsys, path):
    code, out, _ = run(capsys, path, "--check-model")
    assert code == EXIT_OK
    assert out[0] in VERDICTS


def test_console_script():
    exe = shutil.which("qsolve")
    cmd = [exe] if exe else [sys.executable, "-m", "qsolve.cli"]
    r = subprocess.run(cmd + [str(problem_path("lra_bounds_sat"))], capture_output=True, text=True,
                       timeout=120)
    assert r.returncode == 0
    assert r.stdout.splitlines()[0] == "sat"
