from __future__ import annotations

from pathlib import Path

import pytest

from aipatient.evalharness import load_qa_items
from aipatient.ingest import load_notes, load_spans
from aipatient.kgstore import PatientGraph
from aipatient.mocks import build_identity_mock

REPO = Path(__file__).resolve().parent.parent
FIXTURES = REPO / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def cohort_notes():
    return load_notes(FIXTURES / "notes")


@pytest.fixture(scope="session")
def gold_spans():
    return load_spans(FIXTURES / "gold_spans.jsonl")


@pytest.fixture(scope="session")
def qa_items():
    return load_qa_items(FIXTURES / "qa_items.jsonl")


@pytest.fixture(scope="session")
def cohort_graph() -> PatientGraph:
    return PatientGraph.load(FIXTURES / "cohort.aipkg")


@pytest.fixture()
def identity_adapter():
    return build_identity_mock()


# One visible pass/fail line per acceptance criterion at the end of the run.
_acceptance_results: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid and report.when == "call":
        name = report.nodeid.split("::", 1)[1]
        _acceptance_results[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _acceptance_results.items():
        terminalreporter.write_line(f"[{outcome}] {name}")
