"""Shared fixtures: a synthetic bilingual corpus with nontrivial retrieval signal."""

import json

import pytest


def pytest_runtest_logreport(report):
    # One visible pass/fail line per acceptance criterion.
    if report.when == "call" and "test_acceptance" in report.nodeid:
        outcome = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"\n[{outcome}] {name}")

# Translations of the first-article heading used by the synthetic acts.
_HEADINGS = {"en": "Article 1", "lv": "1. pants"}

_BOILERPLATE = {
    "en": (
        "having regard to the treaty and to the opinion of the committee "
        "whereas measures should be adopted"
    ),
    "lv": (
        "nemot vera ligumu un komitejas atzinumu ta ka ir japienem "
        "attiecigi pasakumi"
    ),
}


def make_act(i: int, language: str, n_extra_pages: int = 1) -> dict:
    """One synthetic act as a corpus JSONL record.

    The metadata block and the body share act-unique subject tokens, so a
    token-bag embedder retrieves far better than chance, while common
    boilerplate keeps the task nontrivial.
    """
    year = 1961 + (i % 40)
    celex = f"3{year}L{i:04d}"
    subject = f"subject{i:03d}q wildlife{i:03d}z"
    metadata = (
        f"commission decision {celex} of {year} concerning {subject} "
        f"{subject} notified under document number c{year} {1000 + i} "
        f"{_BOILERPLATE[language]}"
    )
    body_intro = (
        f"{_HEADINGS[language]}\n"
        f"the provisions on {subject} shall apply {subject} to all matters "
        f"relating to {subject} as set out below {_BOILERPLATE[language]}"
    )
    extra = [
        f"annex {j} further technical detail {subject} item{i:03d}p{j} "
        f"{_BOILERPLATE[language]}"
        for j in range(n_extra_pages)
    ]
    pages = [{"page": 1, "text": metadata + "\n" + body_intro}]
    pages += [{"page": 2 + j, "text": text} for j, text in enumerate(extra)]
    return {"celex_id": celex, "language": language, "year": year, "pages": pages}


def make_bilingual_corpus(n_acts: int = 100) -> list[dict]:
    records = []
    for i in range(n_acts):
        records.append(make_act(i, "en"))
        records.append(make_act(i, "lv"))
    return records


def write_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


@pytest.fixture
def bilingual_corpus_file(tmp_path):
    path = tmp_path / "corpus.jsonl"
    write_jsonl(path, make_bilingual_corpus(100))
    return path


@pytest.fixture
def small_corpus_file(tmp_path):
    path = tmp_path / "small.jsonl"
    write_jsonl(path, make_bilingual_corpus(10))
    return path
