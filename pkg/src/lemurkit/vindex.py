"""Exact cosine vector index with token-cap truncation.

The corpus per language is small (around a thousand documents), so the
index is a plain exhaustive scan: exact scores, no recall noise, and the
brute-force oracle in the tests is trivial.  Ties are broken by doc_id
ascending, which makes every ranking deterministic.

On disk an index is a JSON meta line followed by one JSON line per entry;
vectors are stored post-normalization with 9 significant digits, which
round-trips bit-identically through save/load/save.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

INDEX_FORMAT = "lemurkit-index"
INDEX_VERSION = 1
DEFAULT_CAPS = (2048, 1024, 512)

# Stored vectors must be unit length up to quantization noise.
NORM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class TruncationPolicy:
    """Strictly decreasing sequence of positive token caps."""

    caps: tuple[int, ...] = DEFAULT_CAPS

    def __post_init__(self) -> None:
        caps = tuple(int(c) for c in self.caps)
        object.__setattr__(self, "caps", caps)
        if not caps:
            raise ValueError("policy needs at least one cap")
        if any(c <= 0 for c in caps):
            raise ValueError(f"caps must be positive: {caps}")
        if any(a <= b for a, b in zip(caps, caps[1:])):
            raise ValueError(f"caps must be strictly decreasing: {caps}")

    def cap_for_limit(self, limit: int) -> int:
        """Largest cap not exceeding ``limit``."""
        for cap in self.caps:
            if cap <= limit:
                return cap
        raise ValueError(f"no cap in {self.caps} fits within limit {limit}")


@dataclass(frozen=True)
class TruncationStats:
    """How many documents were cut and how much was removed from them."""

    docs_total: int
    docs_truncated: int
    mean_removed_fraction: float


def truncate_text(text: str, policy: TruncationPolicy, limit: int) -> tuple[str, int]:
    """Apply the largest cap that fits ``limit``; keep the document head.

    Tokens are whitespace runs.  Returns the (possibly shortened) text and
    the number of tokens removed; under-cap text passes through unchanged.
    """
    if limit <= 0:
        raise ValueError(f"limit must be positive, got {limit}")
    cap = policy.cap_for_limit(limit)
    tokens = text.split()
    if len(tokens) <= cap:
        return text, 0
    return " ".join(tokens[:cap]), len(tokens) - cap


def truncate_many(
    texts: list[str], policy: TruncationPolicy, limit: int
) -> tuple[list[tuple[str, int]], TruncationStats]:
    """Truncate a batch and summarize how much was removed."""
    results = [truncate_text(t, policy, limit) for t in texts]
    fractions = [
        removed / (removed + len(text.split()))
        for text, removed in results
        if removed > 0
    ]
    return results, TruncationStats(
        docs_total=len(results),
        docs_truncated=len(fractions),
        mean_removed_fraction=sum(fractions) / len(fractions) if fractions else 0.0,
    )


@dataclass(frozen=True)
class SearchResult:
    """Hits ordered by score descending, ties by doc_id ascending."""

    hits: list[tuple[str, float]]

    def __len__(self) -> int:
        return len(self.hits)

    def __iter__(self):
        return iter(self.hits)

    def ids(self) -> list[str]:
        return [doc_id for doc_id, _ in self.hits]


@dataclass(frozen=True)
class VectorIndex:
    """Immutable store of unit vectors keyed by unique doc ids."""

    dim: int
    doc_ids: tuple[str, ...]
    vectors: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.vectors.shape != (len(self.doc_ids), self.dim):
            raise ValueError("vector matrix shape does not match ids/dim")
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise ValueError("doc_ids must be unique")
        if len(self.doc_ids):
            norms = np.linalg.norm(self.vectors, axis=1)
            worst = np.abs(norms - 1.0).max()
            if worst > NORM_TOLERANCE:
                raise ValueError(f"stored vectors must be unit norm (off by {worst:.2e})")
        self.vectors.setflags(write=False)

    def __len__(self) -> int:
        return len(self.doc_ids)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._id_positions()

    def _id_positions(self) -> dict[str, int]:
        cached = self.__dict__.get("_positions")
        if cached is None:
            cached = {doc_id: i for i, doc_id in enumerate(self.doc_ids)}
            self.__dict__["_positions"] = cached
        return cached

    def position(self, doc_id: str) -> int:
        return self._id_positions()[doc_id]

    def subset(self, keep_ids) -> "VectorIndex":
        """Sub-index with only ``keep_ids``, preserving stored vectors."""
        keep = set(keep_ids)
        rows = [i for i, doc_id in enumerate(self.doc_ids) if doc_id in keep]
        return VectorIndex(
            dim=self.dim,
            doc_ids=tuple(self.doc_ids[i] for i in rows),
            vectors=self.vectors[rows].copy(),
        )

    def save(self, path) -> None:
        """Write the line-oriented index format with 9-significant-digit vectors."""
        lines = [
            '{"format":"%s","version":%d,"dim":%d,"count":%d}'
            % (INDEX_FORMAT, INDEX_VERSION, self.dim, len(self.doc_ids))
        ]
        for doc_id, vec in zip(self.doc_ids, self.vectors):
            nums = ",".join(f"{x:.9g}" for x in vec)
            lines.append('{"doc_id":%s,"vector":[%s]}' % (json.dumps(doc_id), nums))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "VectorIndex":
        """Read an index file; stored vectors are kept exactly as written."""
        with open(path, "r", encoding="utf-8") as fh:
            meta_line = fh.readline()
            try:
                meta = json.loads(meta_line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: bad meta line: {exc}") from exc
            if meta.get("format") != INDEX_FORMAT:
                raise ValueError(f"{path}: not a {INDEX_FORMAT} file")
            if meta.get("version") != INDEX_VERSION:
                raise ValueError(f"{path}: unsupported version {meta.get('version')}")
            dim, count = int(meta["dim"]), int(meta["count"])
            ids: list[str] = []
            rows: list[list[float]] = []
            for line in fh:
                if not line.strip():
                    continue
                entry = json.loads(line)
                ids.append(entry["doc_id"])
                rows.append(entry["vector"])
        if len(ids) != count:
            raise ValueError(f"{path}: expected {count} entries, found {len(ids)}")
        vectors = (
            np.asarray(rows, dtype=np.float64)
            if rows
            else np.empty((0, dim), dtype=np.float64)
        )
        if rows and vectors.shape[1] != dim:
            raise ValueError(f"{path}: entry dimension {vectors.shape[1]} != {dim}")
        return cls(dim=dim, doc_ids=tuple(ids), vectors=vectors)


def build_index(items: list[tuple[str, np.ndarray]]) -> VectorIndex:
    """Normalize raw vectors and freeze them into an index.

    Duplicate ids, dimension mismatches, and zero vectors are errors.
    """
    if not items:
        raise ValueError("cannot build an index from zero items")
    ids = [doc_id for doc_id, _ in items]
    dupes = {d for d in ids if ids.count(d) > 1} if len(set(ids)) != len(ids) else set()
    if dupes:
        raise ValueError(f"duplicate doc_id(s): {sorted(dupes)}")
    try:
        matrix = np.asarray([np.asarray(v, dtype=np.float64) for _, v in items])
    except ValueError as exc:
        raise ValueError(f"vectors must all share one dimension: {exc}") from exc
    if matrix.ndim != 2:
        raise ValueError("vectors must all share one dimension")
    norms = np.linalg.norm(matrix, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(f"zero vector for doc_id {ids[zero[0]]!r}")
    return VectorIndex(
        dim=matrix.shape[1], doc_ids=tuple(ids), vectors=matrix / norms[:, None]
    )


def search(index: VectorIndex, query: np.ndarray, k: int) -> SearchResult:
    """Exact top-k by cosine similarity over every entry."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (index.dim,):
        raise ValueError(f"query dimension {q.shape} does not match index dim {index.dim}")
    norm = math.sqrt(float(q @ q))
    if norm == 0.0:
        raise ValueError("query vector has zero norm")
    scores = index.vectors @ (q / norm)
    order = sorted(range(len(index)), key=lambda i: (-scores[i], index.doc_ids[i]))
    top = order[: min(k, len(index))]
    return SearchResult(hits=[(index.doc_ids[i], float(scores[i])) for i in top])
