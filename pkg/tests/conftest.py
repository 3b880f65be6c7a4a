from __future__ import annotations

from pathlib import Path

import pytest

from qsolve.smtlib import parse_file

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
DATA = Path(__file__).resolve().parent / "data"


def problem_path(name: str) -> Path:
    for base in (CORPUS, DATA):
        p = base / f"{name}.smt2"
        if p.exists():
            return p
    raise FileNotFoundError(name)


@pytest.fixture
def load():
    """Parse a corpus or test-data problem by stem."""
    return lambda name: parse_file(problem_path(name))


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS


def all_problem_files() -> list[Path]:
    return sorted(CORPUS.glob("*.smt2")) + sorted(DATA.glob("*.smt2"))
