"""Metadata-to-document retrieval evaluation: ranks, Acc@k, and comparisons.

rank(q) is the 1-based position of the ground-truth document in the exact
cosine ranking of the searched collection (ties broken by doc_id, matching
the index's search order).  Acc@k is the fraction of queries with
rank <= k.  Two collection settings exist: "full" searches every document,
"test_only" searches held-out test documents only; restricting the
collection can only remove distractors, so test_only accuracy dominates
full accuracy on the same queries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from lemurkit.vindex import VectorIndex

SETTINGS = ("full", "test_only")
DEFAULT_KS = (1, 3, 5)

# Normative shape of a serialized report; not-found ranks serialize as
# rank 0 with found=false because JSON has no infinity.
EVAL_REPORT_SCHEMA = {
    "type": "object",
    "required": ["setting", "num_queries", "excluded", "acc", "ranks"],
    "properties": {
        "setting": {"enum": list(SETTINGS)},
        "num_queries": {"type": "integer", "minimum": 0},
        "excluded": {"type": "integer", "minimum": 0},
        "acc": {
            "type": "object",
            "patternProperties": {
                r"^[1-9][0-9]*$": {"type": "number", "minimum": 0, "maximum": 1}
            },
            "additionalProperties": False,
        },
        "ranks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["query_id", "rank", "found"],
                "properties": {
                    "query_id": {"type": "string"},
                    "rank": {"type": "integer", "minimum": 0},
                    "found": {"type": "boolean"},
                },
            },
        },
    },
}


@dataclass(frozen=True)
class EvalConfig:
    setting: str = "full"
    ks: tuple[int, ...] = DEFAULT_KS

    def __post_init__(self) -> None:
        if self.setting not in SETTINGS:
            raise ValueError(f"setting must be one of {SETTINGS}, got {self.setting!r}")
        ks = tuple(int(k) for k in self.ks)
        object.__setattr__(self, "ks", ks)
        if not ks or any(k < 1 for k in ks):
            raise ValueError(f"ks must be positive: {ks}")
        if any(a >= b for a, b in zip(ks, ks[1:])):
            raise ValueError(f"ks must be strictly increasing: {ks}")


@dataclass(frozen=True)
class QueryRank:
    """Rank of one query's ground truth; ``rank`` is None when not found."""

    query_id: str
    rank: int | None


@dataclass(frozen=True)
class EvalReport:
    setting: str
    num_queries: int
    excluded: int
    acc: dict[int, float]
    ranks: list[QueryRank] = field(repr=False)

    def to_json_dict(self) -> dict:
        return {
            "setting": self.setting,
            "num_queries": self.num_queries,
            "excluded": self.excluded,
            "acc": {str(k): v for k, v in sorted(self.acc.items())},
            "ranks": [
                {
                    "query_id": r.query_id,
                    "rank": r.rank if r.rank is not None else 0,
                    "found": r.rank is not None,
                }
                for r in self.ranks
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json_dict(cls, obj: dict) -> "EvalReport":
        return cls(
            setting=obj["setting"],
            num_queries=int(obj["num_queries"]),
            excluded=int(obj["excluded"]),
            acc={int(k): float(v) for k, v in obj["acc"].items()},
            ranks=[
                QueryRank(
                    query_id=r["query_id"],
                    rank=int(r["rank"]) if r["found"] else None,
                )
                for r in obj["ranks"]
            ],
        )


def accuracy_from_ranks(
    ranks: list[int | None], ks: tuple[int, ...]
) -> dict[int, float]:
    """Acc@k for each k: the fraction of ranks that are <= k.

    A None rank means the ground truth was never retrieved and fails
    every cutoff.  Non-decreasing in k by construction.
    """
    if not ranks:
        return {k: 0.0 for k in ks}
    return {
        k: sum(1 for r in ranks if r is not None and r <= k) / len(ranks)
        for k in ks
    }


def rank_of(index: VectorIndex, query_vector: np.ndarray, truth_doc_id: str) -> int:
    """1-based rank the ground truth would take in the full sorted ranking."""
    position = index.position(truth_doc_id)
    q = np.asarray(query_vector, dtype=np.float64)
    if q.shape != (index.dim,):
        raise ValueError(f"query dimension {q.shape} does not match index dim {index.dim}")
    norm = float(np.linalg.norm(q))
    if norm == 0.0:
        raise ValueError("query vector has zero norm")
    scores = index.vectors @ (q / norm)
    truth_score = scores[position]
    truth_id = index.doc_ids[position]
    ahead = 0
    for i, score in enumerate(scores):
        if score > truth_score or (score == truth_score and index.doc_ids[i] < truth_id):
            ahead += 1
    return ahead + 1


def evaluate(
    queries: list[tuple[str, np.ndarray, str]],
    index: VectorIndex,
    config: EvalConfig,
) -> tuple[EvalReport, list[str]]:
    """Rank every query's ground truth and compute Acc@k.

    ``queries`` holds (query_id, query_vector, truth_doc_id) triples.
    Queries whose ground truth is missing from the searched collection are
    excluded and counted, with one diagnostic each.  Returns
    (report, diagnostics); the report is a pure function of the inputs.
    """
    diagnostics: list[str] = []
    ranks: list[QueryRank] = []
    excluded = 0
    for query_id, vector, truth_doc_id in queries:
        if truth_doc_id not in index:
            diagnostics.append(
                f"{query_id}: ground truth {truth_doc_id!r} not in collection, excluded"
            )
            excluded += 1
            continue
        ranks.append(QueryRank(query_id, rank_of(index, vector, truth_doc_id)))
    report = EvalReport(
        setting=config.setting,
        num_queries=len(ranks),
        excluded=excluded,
        acc=accuracy_from_ranks([r.rank for r in ranks], config.ks),
        ranks=ranks,
    )
    return report, diagnostics


@dataclass(frozen=True)
class CompareReport:
    """Per-k accuracy change from a base report to a tuned one."""

    setting: str
    ks: tuple[int, ...]
    base_acc: dict[int, float]
    tuned_acc: dict[int, float]
    delta: dict[int, float]
    relative_gain: dict[int, float | None]

    def to_json_dict(self) -> dict:
        return {
            "setting": self.setting,
            "ks": list(self.ks),
            "base_acc": {str(k): v for k, v in sorted(self.base_acc.items())},
            "tuned_acc": {str(k): v for k, v in sorted(self.tuned_acc.items())},
            "delta": {str(k): v for k, v in sorted(self.delta.items())},
            "relative_gain": {
                str(k): v for k, v in sorted(self.relative_gain.items())
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"


def compare(base: EvalReport, tuned: EvalReport) -> CompareReport:
    """Per-k deltas and relative gains between two reports.

    Both reports must share the same setting and the same k cutoffs.
    Relative gain is delta/base, or None where the base accuracy is zero.
    """
    if base.setting != tuned.setting:
        raise ValueError(f"setting mismatch: {base.setting!r} vs {tuned.setting!r}")
    if sorted(base.acc) != sorted(tuned.acc):
        raise ValueError(f"k mismatch: {sorted(base.acc)} vs {sorted(tuned.acc)}")
    ks = tuple(sorted(base.acc))
    delta = {k: tuned.acc[k] - base.acc[k] for k in ks}
    gain = {k: (delta[k] / base.acc[k] if base.acc[k] > 0 else None) for k in ks}
    return CompareReport(
        setting=base.setting,
        ks=ks,
        base_acc=dict(base.acc),
        tuned_acc=dict(tuned.acc),
        delta=delta,
        relative_gain=gain,
    )


def report_to_markdown(report: EvalReport, title: str = "retrieval") -> str:
    """Text table mirroring the per-k accuracy bars of a report."""
    lines = [
        f"### {title} ({report.setting}, {report.num_queries} queries"
        + (f", {report.excluded} excluded)" if report.excluded else ")"),
        "",
        "| k | Acc@k |",
        "|---|-------|",
    ]
    for k in sorted(report.acc):
        lines.append(f"| {k} | {report.acc[k]:.4f} |")
    return "\n".join(lines) + "\n"


def compare_to_markdown(cmp: CompareReport) -> str:
    lines = [
        f"### base vs tuned ({cmp.setting})",
        "",
        "| k | base | tuned | delta | rel. gain |",
        "|---|------|-------|-------|-----------|",
    ]
    for k in cmp.ks:
        gain = cmp.relative_gain[k]
        gain_txt = f"{gain:+.2%}" if gain is not None else "n/a"
        lines.append(
            f"| {k} | {cmp.base_acc[k]:.4f} | {cmp.tuned_acc[k]:.4f} "
            f"| {cmp.delta[k]:+.4f} | {gain_txt} |"
        )
    return "\n".join(lines) + "\n"
