"""Lexical content scoring between converted-PDF text and reference HTML.

The score is the cosine similarity of the two documents' bag-of-words
count vectors over their shared (union) vocabulary.  Counts stay exact
integers; only the final cosine is computed in double precision, so the
score is reproducible across platforms.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from lemurkit.textnorm import NormalizedText, tokenize

# Type alias: token -> positive count.  collections.Counter satisfies the
# contract and is what bow_vectorize returns.
BowVector = Counter

MIN_YEAR = 1900
MAX_YEAR = 2100
BIN_WIDTH = 5


@dataclass(frozen=True)
class LcsResult:
    """Score in [0,1], size of the shared vocabulary, and an empty-input flag."""

    score: float
    shared_vocab: int
    empty_side_flag: bool


@dataclass(frozen=True)
class LcsAggregate:
    """Mean score for one (language, 5-year bin) group."""

    language: str
    year_bin: int
    mean_score: float
    count: int


def bow_vectorize(text: str | NormalizedText) -> Counter:
    """Count token frequencies of normalized text."""
    return Counter(tokenize(text))


def lcs_score(html: Counter, pdf: Counter) -> LcsResult:
    """Cosine similarity of two count vectors over their union vocabulary.

    Either side empty yields score 0 with ``empty_side_flag`` set, never an
    error, so corrupt extractions do not abort batch scoring.
    """
    if not html or not pdf:
        return LcsResult(score=0.0, shared_vocab=0, empty_side_flag=True)
    shared = html.keys() & pdf.keys()
    dot = sum(html[t] * pdf[t] for t in shared)
    norm_h = math.sqrt(sum(c * c for c in html.values()))
    norm_p = math.sqrt(sum(c * c for c in pdf.values()))
    score = dot / (norm_h * norm_p)
    # Float rounding can nudge an exact match past 1.0; clamp to the range.
    score = min(max(score, 0.0), 1.0)
    return LcsResult(score=score, shared_vocab=len(shared), empty_side_flag=False)


def year_bin(year: int) -> int:
    """Start of the 5-year bin containing ``year`` (1961 -> 1960)."""
    if not MIN_YEAR <= year <= MAX_YEAR:
        raise ValueError(f"year {year} outside [{MIN_YEAR}, {MAX_YEAR}]")
    return (year // BIN_WIDTH) * BIN_WIDTH


def aggregate_lcs(
    results: list[tuple[str, int, LcsResult | float]],
) -> list[LcsAggregate]:
    """Group scores by language and 5-year bin; arithmetic mean per group.

    Accepts either ``LcsResult`` values or bare scores.  Output is sorted
    by (language, bin) for deterministic reports.
    """
    groups: dict[tuple[str, int], list[float]] = {}
    for language, year, result in results:
        score = result.score if isinstance(result, LcsResult) else float(result)
        groups.setdefault((language, year_bin(year)), []).append(score)
    return [
        LcsAggregate(
            language=language,
            year_bin=bin_start,
            mean_score=sum(scores) / len(scores),
            count=len(scores),
        )
        for (language, bin_start), scores in sorted(groups.items())
    ]
