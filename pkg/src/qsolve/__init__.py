"""Instantiation-based solving for quantified linear real and integer arithmetic."""
from qsolve.cegqi import (
    SolverConfig, Status, Verdict, check_model, extract_synthesis_solution, smtqi, solve,
    solve_one_alternation, synthesize,
)
from qsolve.smtlib import parse_file, parse_smtlib

__all__ = [
    "SolverConfig", "Status", "Verdict", "check_model", "extract_synthesis_solution", "parse_file",
    "parse_smtlib", "smtqi", "solve", "solve_one_alternation", "synthesize",
]
