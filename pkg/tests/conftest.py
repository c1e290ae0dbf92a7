from __future__ import annotations

from pathlib import Path

import pytest

from qcache.program import parse_program

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def corpus_files() -> list[Path]:
    return sorted(CORPUS.glob("*.prog"))


@pytest.fixture(scope="session")
def corpus():
    return {p.stem: parse_program(p.read_text()) for p in corpus_files()}


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
