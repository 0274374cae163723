"""Shared fixtures: paths to static test data and small built objects."""

from pathlib import Path

import pytest

from limba.corpus import read_corpus

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def fixture_lines() -> list:
    text = (DATA_DIR / "fixture_corpus.txt").read_text(encoding="utf-8")
    return [line for line in text.splitlines() if line.strip()]


@pytest.fixture(scope="session")
def fixture_corpus(fixture_lines):
    from limba.corpus import ingest

    return ingest(fixture_lines, source="fixture")


@pytest.fixture(scope="session")
def quality_corpus():
    return read_corpus(DATA_DIR / "quality_train.jsonl")


@pytest.fixture(scope="session")
def variant_corpus():
    return read_corpus(DATA_DIR / "variant_train.jsonl")


# One PASS/FAIL line per acceptance criterion, printed after the test
# table (the terminal summary is never swallowed by output capture).
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
